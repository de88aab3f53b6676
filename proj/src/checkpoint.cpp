#include "gr1/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "gr1/sha256.hpp"
#include "json.hpp"

namespace gr1 {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {
constexpr int kFormatVersion = 1;

std::vector<uint8_t> array_bytes(const MatXf& m) {
  std::vector<uint8_t> bytes(size_t(m.size()) * 4);
  size_t k = 0;
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) {
      float f = m(r, c);
      std::memcpy(bytes.data() + k, &f, 4);
      k += 4;
    }
  return bytes;
}
}  // namespace

void save_checkpoint_arrays(const std::string& dir,
                            const std::vector<ArrayEntry>& arrays,
                            const Config& cfg, uint64_t seed,
                            const std::map<std::string, std::string>& inputs) {
  fs::create_directories(dir + "/arrays");
  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["seed"] = seed;
  manifest["config"] = json::parse(config_to_json_text(cfg));
  json jin = json::object();
  for (const auto& [k, v] : inputs) jin[k] = v;
  manifest["inputs"] = std::move(jin);

  Sha256Stream all;
  json jarrays = json::array();
  for (size_t i = 0; i < arrays.size(); ++i) {
    const ArrayEntry& a = arrays[i];
    char fname[32];
    std::snprintf(fname, sizeof(fname), "arrays/a%05zu.bin", i);
    auto bytes = array_bytes(a.value);
    std::ofstream out(dir + "/" + fname, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + a.name);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              std::streamsize(bytes.size()));
    if (!out) throw std::runtime_error("checkpoint: write failed " + a.name);
    std::string hash = sha256_hex(bytes);
    all.update(hash.data(), hash.size());

    json e;
    e["name"] = a.name;
    e["rows"] = int(a.value.rows());
    e["cols"] = int(a.value.cols());
    e["dtype"] = "f32";
    e["trainable"] = a.trainable;
    e["file"] = fname;
    e["sha256"] = hash;
    jarrays.push_back(std::move(e));
  }
  manifest["arrays"] = std::move(jarrays);
  manifest["content_hash"] = all.hex();

  std::ofstream out(dir + "/manifest.json", std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write manifest");
  out << manifest.dump(2) << "\n";
}

CheckpointData load_checkpoint(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in) throw std::runtime_error("checkpoint: missing manifest in " + dir);
  json manifest;
  in >> manifest;

  if (manifest.at("format_version").get<int>() != kFormatVersion)
    throw std::runtime_error("checkpoint: unsupported format version");

  CheckpointData ck;
  ck.seed = manifest.at("seed").get<uint64_t>();
  ck.config = config_from_json_text(manifest.at("config").dump());
  ck.content_hash = manifest.at("content_hash").get<std::string>();
  for (auto it = manifest.at("inputs").begin();
       it != manifest.at("inputs").end(); ++it)
    ck.inputs[it.key()] = it.value().get<std::string>();

  Sha256Stream all;
  for (const auto& e : manifest.at("arrays")) {
    ArrayEntry a;
    a.name = e.at("name").get<std::string>();
    a.trainable = e.at("trainable").get<bool>();
    int rows = e.at("rows").get<int>(), cols = e.at("cols").get<int>();
    if (e.at("dtype").get<std::string>() != "f32")
      throw std::runtime_error("checkpoint: unsupported dtype for " + a.name);
    std::string path = dir + "/" + e.at("file").get<std::string>();
    std::ifstream blob(path, std::ios::binary);
    if (!blob)
      throw std::runtime_error("checkpoint: missing blob for " + a.name);
    std::vector<uint8_t> bytes(size_t(rows) * cols * 4);
    blob.read(reinterpret_cast<char*>(bytes.data()),
              std::streamsize(bytes.size()));
    if (size_t(blob.gcount()) != bytes.size())
      throw std::runtime_error("checkpoint: short blob for " + a.name);
    std::string hash = sha256_hex(bytes);
    if (hash != e.at("sha256").get<std::string>())
      throw std::runtime_error("checkpoint: hash mismatch for " + a.name);
    all.update(hash.data(), hash.size());

    a.value.resize(rows, cols);
    size_t k = 0;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        float f;
        std::memcpy(&f, bytes.data() + k, 4);
        a.value(r, c) = f;
        k += 4;
      }
    ck.arrays.push_back(std::move(a));
  }
  if (all.hex() != ck.content_hash)
    throw std::runtime_error("checkpoint: content hash mismatch");
  return ck;
}

std::string checkpoint_content_hash(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in) throw std::runtime_error("checkpoint: missing manifest in " + dir);
  json manifest;
  in >> manifest;
  return manifest.at("content_hash").get<std::string>();
}

}  // namespace gr1
