#include "stvqa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "stvqa/config.hpp"

namespace stvqa {

namespace {

constexpr char kMagic[8] = {'S', 'T', 'V', 'Q', 'A', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

template <class T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T take(std::ifstream& in, const std::string& what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("checkpoint truncated while reading " + what);
  return v;
}

void put_string(std::ofstream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string take_string(std::ifstream& in, const std::string& what) {
  const auto n = take<std::uint32_t>(in, what + " length");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw std::runtime_error("checkpoint truncated while reading " + what);
  return s;
}

// rounds the live tensor to float32 while writing it
void put_tensor_committing(std::ofstream& out, Tensor& t) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (int d : t.shape) put<std::int32_t>(out, d);
  for (double& v : t.data) {
    const float f = static_cast<float>(v);
    v = static_cast<double>(f);
    put<float>(out, f);
  }
}

Tensor take_tensor(std::ifstream& in, const std::string& what) {
  const auto rank = take<std::uint32_t>(in, what + " rank");
  if (rank > 2) throw std::runtime_error("checkpoint tensor '" + what + "' has rank > 2");
  std::vector<int> shape;
  for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(take<std::int32_t>(in, what + " dims"));
  Tensor t(shape.empty() ? std::vector<int>{1} : shape);
  if (rank == 0) t = Tensor({1});
  for (auto& v : t.data) v = static_cast<double>(take<float>(in, what + " data"));
  return t;
}

}  // namespace

void save_checkpoint(Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);

  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::int64_t>(out, ck.global_step);
  put<std::uint64_t>(out, ck.seed);
  put_string(out, model_config_to_kv(ck.params.config).to_text());

  ParamSet& ps = ck.params.set;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ps.size()));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    put_string(out, ps[i].name);
    put_tensor_committing(out, ps[i].value);
  }

  put<std::uint8_t>(out, ck.has_optimizer ? 1 : 0);
  if (ck.has_optimizer) {
    const AdamHyper& h = ck.opt.hyper();
    put<double>(out, h.lr);
    put<double>(out, h.beta1);
    put<double>(out, h.beta2);
    put<double>(out, h.eps);
    put<std::int64_t>(out, ck.opt.step_count());
    for (auto& t : ck.opt.first_moments()) put_tensor_committing(out, t);
    for (auto& t : ck.opt.second_moments()) put_tensor_committing(out, t);
  }
  if (!out) throw std::runtime_error("write failed for checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);

  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw std::runtime_error("not a checkpoint file (bad magic): " + path);
  const auto version = take<std::uint32_t>(in, "version");
  if (version != kVersion)
    throw std::runtime_error("checkpoint format version " + std::to_string(version) +
                             " unsupported (expected " + std::to_string(kVersion) + ")");

  Checkpoint ck;
  ck.global_step = take<std::int64_t>(in, "global step");
  ck.seed = take<std::uint64_t>(in, "seed");
  const ModelConfig cfg = model_config_from_kv(KvConfig::parse_text(take_string(in, "config")));

  // rebuild the declared parameter structure, then overwrite from the file
  ck.params = ModelParams::init(cfg, /*seed=*/0);
  const auto count = take<std::uint32_t>(in, "parameter count");
  if (count != ck.params.set.size())
    throw std::runtime_error("checkpoint has " + std::to_string(count) + " parameter blocks, config implies " +
                             std::to_string(ck.params.set.size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = take_string(in, "parameter name");
    Tensor t = take_tensor(in, name);
    Tensor& dst = ck.params.set.at(name);
    if (!dst.same_shape(t))
      throw std::runtime_error("checkpoint tensor '" + name + "' has shape " + shape_str(t.shape) +
                               " but the config implies " + shape_str(dst.shape));
    t.requires_grad = true;
    dst = std::move(t);
  }

  ck.has_optimizer = take<std::uint8_t>(in, "optimizer flag") != 0;
  if (ck.has_optimizer) {
    AdamHyper h;
    h.lr = take<double>(in, "adam lr");
    h.beta1 = take<double>(in, "adam beta1");
    h.beta2 = take<double>(in, "adam beta2");
    h.eps = take<double>(in, "adam eps");
    const auto steps = take<std::int64_t>(in, "adam step count");
    ck.opt = AdamState(ck.params.set, h);
    ck.opt.set_step_count(steps);
    for (std::size_t i = 0; i < ck.params.set.size(); ++i) {
      Tensor t = take_tensor(in, "adam m[" + std::to_string(i) + "]");
      if (!t.same_shape(ck.params.set[i].value))
        throw std::runtime_error("optimizer moment shape mismatch at block " + std::to_string(i));
      ck.opt.first_moments()[i] = std::move(t);
    }
    for (std::size_t i = 0; i < ck.params.set.size(); ++i) {
      Tensor t = take_tensor(in, "adam v[" + std::to_string(i) + "]");
      if (!t.same_shape(ck.params.set[i].value))
        throw std::runtime_error("optimizer moment shape mismatch at block " + std::to_string(i));
      ck.opt.second_moments()[i] = std::move(t);
    }
  }
  return ck;
}

}  // namespace stvqa
