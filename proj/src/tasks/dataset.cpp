#include "urm/tasks/dataset.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "urm/tasks/grid_tasks.hpp"
#include "urm/tasks/sudoku.hpp"

namespace urm::tasks {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool is_sudoku(const std::string& family) { return family == "sudoku4" || family == "sudoku6"; }

PuzzleInstance generate_one(const DatasetSpec& spec, std::uint64_t seed) {
  if (is_sudoku(spec.family)) return gen_mini_sudoku(spec.family == "sudoku4" ? 4 : 6, spec.holes, seed);
  return gen_grid_task(grid_family_from_string(spec.family), spec.size, seed);
}

}  // namespace

void to_json(nlohmann::json& j, const DatasetSpec& s) {
  j = {{"family", s.family},           {"size", s.size},
       {"holes", s.holes},             {"train_count", s.train_count},
       {"eval_count", s.eval_count},   {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, DatasetSpec& s) {
  for (const auto& [key, value] : j.items()) {
    if (key == "family") value.get_to(s.family);
    else if (key == "size") value.get_to(s.size);
    else if (key == "holes") value.get_to(s.holes);
    else if (key == "train_count") value.get_to(s.train_count);
    else if (key == "eval_count") value.get_to(s.eval_count);
    else if (key == "seed") value.get_to(s.seed);
    else throw std::invalid_argument("unknown dataset key: " + key);
  }
}

int family_index(const std::string& family) {
  if (family == "sudoku4") return 0;
  if (family == "sudoku6") return 1;
  const auto& all = all_grid_families();
  for (std::size_t i = 0; i < all.size(); ++i)
    if (family_name(all[i]) == family) return int(2 + i);
  throw std::invalid_argument("unknown task family: " + family);
}

bool verify_instance(const PuzzleInstance& inst) {
  if (is_sudoku(inst.family)) {
    const auto shape = sudoku_shape(inst.family == "sudoku4" ? 4 : 6);
    Grid solution;
    return count_sudoku_solutions(inst.input, shape, 2, &solution) == 1 && solution == inst.target;
  }
  return apply_rule(grid_family_from_string(inst.family), inst.input) == inst.target;
}

Dataset generate_dataset(const DatasetSpec& spec) {
  Dataset ds;
  ds.spec = spec;
  const std::size_t wanted = spec.train_count + spec.eval_count;
  std::set<std::pair<Grid, Grid>> seen;
  const std::size_t max_attempts = wanted * 50 + 100;
  const int fam = family_index(spec.family);
  std::size_t attempt = 0;
  int next_id = 0;
  while (std::size_t(next_id) < wanted) {
    if (attempt >= max_attempts)
      throw std::runtime_error("generate_dataset: could not find " + std::to_string(wanted) +
                               " distinct instances for " + spec.family);
    auto inst = generate_one(spec, splitmix64(spec.seed * 0x100000001b3ULL + attempt++));
    if (!seen.insert({inst.input, inst.target}).second) continue;
    if (!verify_instance(inst)) throw std::logic_error("generated instance fails its own oracle");
    inst.family_id = fam;
    inst.instance_id = next_id++;
    (std::size_t(inst.instance_id) < spec.train_count ? ds.train : ds.eval).push_back(std::move(inst));
  }
  return ds;
}

nlohmann::json instance_to_json(const PuzzleInstance& inst) {
  return {{"family", inst.family},          {"family_id", inst.family_id},
          {"instance_id", inst.instance_id}, {"input", inst.input.to_rows()},
          {"target", inst.target.to_rows()}, {"flags", inst.flags}};
}

PuzzleInstance instance_from_json(const nlohmann::json& j) {
  PuzzleInstance inst;
  j.at("family").get_to(inst.family);
  j.at("family_id").get_to(inst.family_id);
  j.at("instance_id").get_to(inst.instance_id);
  inst.input = Grid::from_rows(j.at("input").get<std::vector<std::vector<int>>>());
  inst.target = Grid::from_rows(j.at("target").get<std::vector<std::vector<int>>>());
  if (j.contains("flags")) j.at("flags").get_to(inst.flags);
  return inst;
}

void write_shard(const std::filesystem::path& path, const std::vector<PuzzleInstance>& instances) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& inst : instances) out << instance_to_json(inst).dump() << '\n';
}

std::vector<PuzzleInstance> read_shard(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<PuzzleInstance> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(instance_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  for (const auto* split : {&ds.train, &ds.eval})
    for (const auto& inst : *split)
      if (!verify_instance(inst)) throw std::logic_error("refusing to write an instance that fails its oracle");
  write_shard(dir / "train.jsonl", ds.train);
  write_shard(dir / "eval.jsonl", ds.eval);
  nlohmann::json manifest = {{"format_version", kDatasetFormatVersion},
                             {"spec", ds.spec},
                             {"counts", {{"train", ds.train.size()}, {"eval", ds.eval.size()}}},
                             {"shards", {{"train", "train.jsonl"}, {"eval", "eval.jsonl"}}}};
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  out << manifest.dump(2) << '\n';
}

Dataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("missing manifest.json in " + dir.string());
  const auto manifest = nlohmann::json::parse(in);
  if (manifest.at("format_version").get<int>() != kDatasetFormatVersion)
    throw std::runtime_error("unsupported dataset format version");
  Dataset ds;
  manifest.at("spec").get_to(ds.spec);
  ds.train = read_shard(dir / manifest.at("shards").at("train").get<std::string>());
  ds.eval = read_shard(dir / manifest.at("shards").at("eval").get<std::string>());
  return ds;
}

}  // namespace urm::tasks
