#include <fstream>
#include <string>

#include "vcr/caa.hpp"
#include "vcr/keyvalue.hpp"
#include "vcr/tensor_io.hpp"

namespace vcr {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifest = "manifest.txt";
constexpr const char* kConfig = "caa.cfg";

std::string branch_key(std::size_t layer, const char* stream, std::size_t branch) {
  return "layer" + std::to_string(layer) + "." + stream + ".branch" + std::to_string(branch);
}

template <class Fn>
void for_each_branch(std::size_t layers, Fn&& fn) {
  for (std::size_t x = 0; x < layers; ++x) {
    for (const char* stream : {"tce_i", "tce_hv"}) {
      for (std::size_t y = 0; y < 3; ++y) fn(x, stream, y, branch_key(x + 1, stream, y + 1));
    }
  }
}

template <class Weights>
auto& branch_of(Weights& w, std::size_t x, const std::string& stream, std::size_t y) {
  auto& layer = w.layers[x];
  return (stream == "tce_i" ? layer.tce_i : layer.tce_hv).branches[y];
}

double scalar_tensor(const Tensor& t, const std::string& key) {
  if (t.size() != 1) throw IoError(key + " must hold a single value, got shape " + shape_string(t.shape()));
  return t.values()[0];
}

}  // namespace

void save_caa_config(const fs::path& path, const CaaConfig& cfg) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "mask_ratio = " << format_double(cfg.mask_ratio) << '\n'
     << "num_layers = " << cfg.num_layers << '\n'
     << "tce_kernel = " << cfg.tce_kernel << '\n'
     << "fusion_strength = " << format_double(cfg.fusion_strength) << '\n'
     << "norm_eps = " << format_double(cfg.norm_eps) << '\n';
}

CaaConfig load_caa_config(const fs::path& path) {
  const KeyValues kv = read_key_values(path);
  CaaConfig cfg;
  cfg.mask_ratio = kv_double(kv, "mask_ratio", cfg.mask_ratio);
  const long long layers = kv_int(kv, "num_layers", static_cast<long long>(cfg.num_layers));
  const long long kernel = kv_int(kv, "tce_kernel", static_cast<long long>(cfg.tce_kernel));
  if (layers <= 0 || kernel <= 0) throw ConfigError(path.string() + ": counts must be positive");
  cfg.num_layers = static_cast<std::size_t>(layers);
  cfg.tce_kernel = static_cast<std::size_t>(kernel);
  cfg.fusion_strength = kv_double(kv, "fusion_strength", cfg.fusion_strength);
  cfg.norm_eps = kv_double(kv, "norm_eps", cfg.norm_eps);
  cfg.validate();
  return cfg;
}

void save_weight_bundle(const fs::path& dir, const CaaConfig& cfg, const CaaWeights& weights) {
  weights.check(cfg);
  fs::create_directories(dir);
  save_caa_config(dir / kConfig, cfg);
  std::ofstream manifest(dir / kManifest);
  if (!manifest) throw IoError("cannot write " + (dir / kManifest).string());
  manifest << "# CAA weight bundle\n";
  for_each_branch(cfg.num_layers, [&](std::size_t x, const char* stream, std::size_t y,
                                      const std::string& key) {
    const TceBranch& b = branch_of(weights, x, stream, y);
    const std::pair<const char*, Tensor> items[] = {
        {".kernel", b.kernel},
        {".norm_gain", Tensor({1}, b.norm_gain)},
        {".norm_bias", Tensor({1}, b.norm_bias)},
    };
    for (const auto& [suffix, tensor] : items) {
      const std::string file = key + suffix + ".vcrt";
      save_tensor(dir / file, tensor);
      manifest << key << suffix << " = " << file << '\n';
    }
  });
}

CaaWeights load_weight_bundle(const fs::path& dir, CaaConfig& cfg_out) {
  const CaaConfig cfg = load_caa_config(dir / kConfig);
  const KeyValues manifest = read_key_values(dir / kManifest);
  CaaWeights w = CaaWeights::zeros(cfg);

  auto tensor_for = [&](const std::string& key) {
    const auto it = manifest.find(key);
    if (it == manifest.end()) throw IoError("weight manifest lacks key '" + key + "'");
    return load_tensor(dir / it->second);
  };

  for_each_branch(cfg.num_layers, [&](std::size_t x, const char* stream, std::size_t y,
                                      const std::string& key) {
    TceBranch& b = branch_of(w, x, stream, y);
    b.kernel = tensor_for(key + ".kernel");
    b.norm_gain = scalar_tensor(tensor_for(key + ".norm_gain"), key + ".norm_gain");
    b.norm_bias = scalar_tensor(tensor_for(key + ".norm_bias"), key + ".norm_bias");
  });
  w.check(cfg);
  cfg_out = cfg;
  return w;
}

}  // namespace vcr
