#include "urm/harness/attention_tools.hpp"

#include <algorithm>
#include <fstream>

#include "urm/nn/attention_dump.hpp"
#include "urm/tasks/dataset.hpp"

namespace urm::harness {

core::NdArray<float> collect_attention(const model::UrmModel<float>& model, const tasks::PuzzleInstance& instance) {
  core::NoGradGuard no_grad;
  const std::vector<tasks::PuzzleInstance> one{instance};
  const auto batch = model::make_batch(one, model.config());
  model::ForwardOptions opts;
  opts.record_attention = true;
  model.forward(batch, opts);
  const auto& recorded = model.recorded_attention();  // loop-major, layer-minor, each [1 x h x T x T]
  const std::size_t layers = model.config().layers;
  if (recorded.empty() || recorded.size() % layers != 0)
    throw std::logic_error("attention recording does not match the layer count");
  const std::size_t loops = recorded.size() / layers;
  const std::size_t heads = recorded[0].extent(1), T = recorded[0].extent(2);
  const std::size_t block = heads * T * T;
  core::NdArray<float> out(core::Shape{layers, loops, heads, T, T});
  for (std::size_t t = 0; t < loops; ++t)
    for (std::size_t l = 0; l < layers; ++l)
      std::copy_n(recorded[t * layers + l].data().begin(), block, out.data().begin() + (l * loops + t) * block);
  return out;
}

AttentionDumpFiles dump_attention(const model::UrmModel<float>& model, const tasks::PuzzleInstance& instance,
                                  const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto attn = collect_attention(model, instance);
  AttentionDumpFiles files{dir / "attention.bin", dir / "attention_index.json", dir / "attention_entropy.json"};
  nn::write_attention_dump(files.dump, attn);
  const nlohmann::json index = {{"file", files.dump.filename().string()},
                                {"dims", attn.shape()},
                                {"axes", {"layer", "loop", "head", "query", "key"}},
                                {"dtype", "float32le"},
                                {"seq_len", model.config().max_seq_len},
                                {"instance", tasks::instance_to_json(instance)}};
  std::ofstream(files.index) << index.dump(2) << '\n';
  std::ofstream(files.entropy) << nn::attention_entropy_summary(attn).dump() << '\n';
  return files;
}

}  // namespace urm::harness
