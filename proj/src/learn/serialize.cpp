#include "rmg/learn/serialize.hpp"

#include "rmg/error.hpp"
#include "rmg/rng.hpp"

#include <bit>
#include <cstring>

namespace rmg::learn {

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

namespace {

class Writer {
 public:
  template <typename U>
  void pod(U v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    out.append(p, sizeof(U));
  }
  void str(std::string_view s) {
    pod(static_cast<std::uint32_t>(s.size()));
    out.append(s.data(), s.size());
  }
  std::string out;
};

class Reader {
 public:
  explicit Reader(std::string_view b) : bytes(b) {}
  template <typename U>
  U pod() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, bytes.data() + pos, sizeof(U));
    pos += sizeof(U);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s(bytes.substr(pos, n));
    pos += n;
    return s;
  }
  void need(std::size_t n) const {
    if (pos + n > bytes.size()) throw Error(ErrorCode::SizeError, "model file truncated");
  }
  std::string_view bytes;
  std::size_t pos = 0;
};

std::uint64_t fnv(std::string_view s) {
  Fnv1a h;
  h.update(s.data(), s.size());
  return h.digest();
}

}  // namespace

template <typename T>
std::string serialize_model(const Model<T>& model) {
  Writer w;
  w.out.append("RMGM", 4);
  w.pod(kModelFormatVersion);
  w.str(arch_name(model.config().arch));
  const std::string cfg = to_json(model.config()).dump();
  w.str(cfg);
  w.pod(fnv(cfg));
  const auto& ps = model.params();
  w.pod(static_cast<std::uint32_t>(ps.size()));
  for (const auto& p : ps) {
    w.str(p.name);
    w.pod(static_cast<std::uint32_t>(p.shape.size()));
    for (int d : p.shape) w.pod(static_cast<std::uint32_t>(d));
    for (Eigen::Index k = 0; k < p.value.size(); ++k) w.pod(static_cast<float>(p.value.data()[k]));
  }
  w.pod(fnv(w.out));
  return w.out;
}

template <typename T>
std::unique_ptr<Model<T>> deserialize_model(std::string_view bytes) {
  if (bytes.size() < 8 + 8 || bytes.substr(0, 4) != "RMGM") throw Error(ErrorCode::FormatError, "not an RMGM file");
  const std::string_view body = bytes.substr(0, bytes.size() - 8);
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body.size(), 8);
  if (stored != fnv(body)) throw Error(ErrorCode::CorruptDataset, "model digest mismatch");

  Reader r(body);
  r.pos = 4;
  const auto version = r.pod<std::uint32_t>();
  if (version != kModelFormatVersion) throw Error(ErrorCode::FormatError, "unsupported model version " + std::to_string(version));
  const std::string tag = r.str();
  const std::string cfg_text = r.str();
  if (r.pod<std::uint64_t>() != fnv(cfg_text)) throw Error(ErrorCode::CorruptDataset, "config digest mismatch");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(cfg_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("model config: ") + e.what());
  }
  const ModelConfig cfg = model_config_from_json(j);
  if (arch_name(cfg.arch) != tag) throw Error(ErrorCode::FormatError, "arch tag does not match config");
  auto model = make_model<T>(cfg, 0);
  auto& ps = model->params();
  const auto n = r.pod<std::uint32_t>();
  if (n != ps.size()) throw Error(ErrorCode::FormatError, "tensor count mismatch");
  for (std::uint32_t i = 0; i < n; ++i) {
    auto& p = ps[static_cast<int>(i)];
    const std::string name = r.str();
    if (name != p.name) throw Error(ErrorCode::FormatError, "unexpected tensor '" + name + "'");
    const auto ndim = r.pod<std::uint32_t>();
    if (ndim != p.shape.size()) throw Error(ErrorCode::FormatError, "rank mismatch for " + name);
    for (std::uint32_t d = 0; d < ndim; ++d)
      if (r.pod<std::uint32_t>() != static_cast<std::uint32_t>(p.shape[d]))
        throw Error(ErrorCode::FormatError, "shape mismatch for " + name);
    for (Eigen::Index k = 0; k < p.value.size(); ++k) p.value.data()[k] = static_cast<T>(r.pod<float>());
  }
  if (r.pos != body.size()) throw Error(ErrorCode::SizeError, "trailing bytes in model file");
  return model;
}

template std::string serialize_model<float>(const Model<float>&);
template std::string serialize_model<double>(const Model<double>&);
template std::unique_ptr<Model<float>> deserialize_model<float>(std::string_view);
template std::unique_ptr<Model<double>> deserialize_model<double>(std::string_view);

}  // namespace rmg::learn
