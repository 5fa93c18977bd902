#include <gtest/gtest.h>

#include "urm/harness/gradcheck_suite.hpp"

using namespace urm;

TEST(GradCheckSuite, EveryCasePassesOnTwentyRandomDraws) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto cases = harness::default_gradcheck_cases(seed);
    std::erase_if(cases, [](const harness::GradCheckCase& c) { return c.name == "urm_end_to_end"; });
    const auto report = harness::run_gradcheck_suite(cases);
    for (const auto& e : report.entries)
      EXPECT_TRUE(e.ok) << "seed " << seed << " " << e.name << ": " << e.result.max_rel_error << " " << e.result.worst;
    EXPECT_LT(report.max_rel_error, 1e-4);
  }
}

TEST(GradCheckSuite, EndToEndTinyModel) {
  auto cases = harness::default_gradcheck_cases(1);
  std::erase_if(cases, [](const harness::GradCheckCase& c) { return c.name != "urm_end_to_end"; });
  ASSERT_EQ(cases.size(), 1u);
  const auto r = cases[0].run({});
  EXPECT_TRUE(r.passed) << r.max_rel_error << " " << r.worst;
  EXPECT_GT(r.entries_checked, 1000u);
}

TEST(GradCheckSuite, CorruptedBackwardIsCaught) {
  const auto cases = harness::default_gradcheck_cases(3);
  const auto it = std::find_if(cases.begin(), cases.end(), [](const auto& c) { return c.expect_failure; });
  ASSERT_NE(it, cases.end());
  const auto r = it->run({});
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.max_rel_error, 1e-2);
}

TEST(GradCheckSuite, DetachCaseIsExact) {
  const auto cases = harness::default_gradcheck_cases(4);
  const auto it = std::find_if(cases.begin(), cases.end(), [](const auto& c) { return c.name == "detach"; });
  ASSERT_NE(it, cases.end());
  EXPECT_EQ(it->run({}).max_rel_error, 0.0);
}

TEST(GradCheck, RelativeErrorFloor) {
  EXPECT_EQ(core::relative_error(0.0, 0.0, 1e-6), 0.0);
  EXPECT_DOUBLE_EQ(core::relative_error(1e-9, 0.0, 1e-6), 1e-3);
  EXPECT_DOUBLE_EQ(core::relative_error(2.0, 1.0, 1e-6), 0.5);
}
