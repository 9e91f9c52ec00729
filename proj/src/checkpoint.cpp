#include "muxdet/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace muxdet {

namespace {

constexpr char kMagic[8] = {'M', 'U', 'X', 'C', 'K', 'P', 'T', '1'};

void write_doubles(std::ofstream& out, const Real* data, std::size_t n) {
  static_assert(sizeof(Real) == 8);
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(n * sizeof(Real)));
}

void read_doubles(std::ifstream& in, Real* data, std::size_t n) {
  in.read(reinterpret_cast<char*>(data),
          static_cast<std::streamsize>(n * sizeof(Real)));
  if (!in) throw std::runtime_error("checkpoint: truncated tensor payload");
}

}  // namespace

void save_checkpoint(const std::string& path, const HybridModel& model) {
  nlohmann::json header;
  header["format_version"] = 1;
  header["encoder"] = {
      {"tile", {model.encoder.arch.tile_rows, model.encoder.arch.tile_cols}},
      {"channels", model.encoder.arch.channels},
      {"frame", {model.encoder.frame_rows, model.encoder.frame_cols}}};
  header["stack"] = {{"K", model.stack.K()},
                     {"distances_um", model.stack.distances_um},
                     {"layer_pitch_um", model.stack.layer_pitch_um}};
  if (model.stack.K() > 0)
    header["stack"]["layer_shape"] = {model.stack.layers[0].rows(),
                                      model.stack.layers[0].cols()};

  auto params = param_tensors(const_cast<EncoderParams&>(model.encoder));
  auto& tensors = header["tensors"] = nlohmann::json::array();
  for (std::size_t i = 0; i < params.size(); ++i)
    tensors.push_back({{"name", "encoder." + std::to_string(i)},
                       {"count", params[i]->size()}});
  for (std::size_t k = 0; k < model.stack.K(); ++k)
    tensors.push_back({{"name", "stack.layer" + std::to_string(k)},
                       {"count", model.stack.layers[k].size()}});

  const std::string hdr = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = hdr.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
  for (const auto* t : params) write_doubles(out, t->data(), t->size());
  for (const auto& layer : model.stack.layers)
    write_doubles(out, layer.data(), layer.size());
  if (!out) throw std::runtime_error("short write: " + path);
}

HybridModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string hdr(len, '\0');
  in.read(hdr.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("checkpoint: truncated header");
  nlohmann::json header = nlohmann::json::parse(hdr);
  if (header.value("format_version", 0) != 1)
    throw std::runtime_error("checkpoint: unsupported format version");

  HybridModel model;
  const auto& e = header.at("encoder");
  EncoderArch arch;
  arch.tile_rows = e.at("tile").at(0).get<std::size_t>();
  arch.tile_cols = e.at("tile").at(1).get<std::size_t>();
  arch.channels = e.at("channels").get<std::vector<std::size_t>>();
  model.encoder = init_encoder(arch, e.at("frame").at(0).get<std::size_t>(),
                               e.at("frame").at(1).get<std::size_t>(), 0);

  const auto& s = header.at("stack");
  model.stack.distances_um = s.at("distances_um").get<std::vector<Real>>();
  model.stack.layer_pitch_um = s.value("layer_pitch_um", 8.0);
  const auto K = s.at("K").get<std::size_t>();
  if (K > 0) {
    const auto lr = s.at("layer_shape").at(0).get<std::size_t>();
    const auto lc = s.at("layer_shape").at(1).get<std::size_t>();
    model.stack.layers.assign(K, RealGrid(lr, lc));
  }

  auto params = param_tensors(model.encoder);
  const auto& tensors = header.at("tensors");
  if (tensors.size() != params.size() + K)
    throw std::runtime_error("checkpoint: tensor catalog mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (tensors[i].at("count").get<std::size_t>() != params[i]->size())
      throw std::runtime_error("checkpoint: encoder tensor size mismatch");
    read_doubles(in, params[i]->data(), params[i]->size());
  }
  for (std::size_t k = 0; k < K; ++k) {
    auto& layer = model.stack.layers[k];
    if (tensors[params.size() + k].at("count").get<std::size_t>() !=
        layer.size())
      throw std::runtime_error("checkpoint: layer tensor size mismatch");
    read_doubles(in, layer.data(), layer.size());
  }
  return model;
}

}  // namespace muxdet
