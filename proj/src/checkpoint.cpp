#include "vmr/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace vmr {

namespace {
constexpr char kMagic[4] = {'V', 'M', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void wr(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T rd(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

void write_string(std::ofstream& out, const std::string& s) {
  wr<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in) {
  const auto n = rd<std::uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  return s;
}

void write_tensor(std::ofstream& out, const std::string& name,
                  const nn::Mat& m) {
  write_string(out, name);
  wr<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  wr<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) wr<double>(out, m(r, c));
}

CheckpointMeta read_header(std::ifstream& in, const std::string& path) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError("checkpoint " + path + ": bad magic");
  const auto fmt = rd<std::uint32_t>(in);
  if (fmt != kFormatVersion)
    throw CheckpointError("checkpoint " + path + ": unsupported format " +
                          std::to_string(fmt));
  CheckpointMeta meta;
  meta.fingerprint = rd<std::uint64_t>(in);
  meta.seed = rd<std::uint64_t>(in);
  meta.version = read_string(in);
  meta.epoch = rd<std::int32_t>(in);
  meta.best_val = rd<double>(in);
  meta.adam_step = rd<std::int32_t>(in);
  return meta;
}
}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<nn::Param*>& params,
                     const CheckpointMeta& meta, bool include_adam) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(kMagic, 4);
  wr<std::uint32_t>(out, kFormatVersion);
  wr<std::uint64_t>(out, meta.fingerprint);
  wr<std::uint64_t>(out, meta.seed);
  write_string(out, meta.version);
  wr<std::int32_t>(out, meta.epoch);
  wr<double>(out, meta.best_val);
  wr<std::int32_t>(out, meta.adam_step);

  std::uint32_t count = static_cast<std::uint32_t>(params.size());
  if (include_adam) count *= 3;
  wr<std::uint32_t>(out, count);
  for (const nn::Param* p : params) {
    write_tensor(out, p->name, p->value);
    if (include_adam) {
      nn::Mat zero = nn::Mat::Zero(p->value.rows(), p->value.cols());
      write_tensor(out, "adam.m." + p->name,
                   p->adam_m.size() ? p->adam_m : zero);
      write_tensor(out, "adam.v." + p->name,
                   p->adam_v.size() ? p->adam_v : zero);
    }
  }
}

CheckpointMeta load_checkpoint(const std::filesystem::path& path,
                               const std::vector<nn::Param*>& params,
                               std::uint64_t expected_fingerprint,
                               bool load_adam) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  CheckpointMeta meta = read_header(in, path.string());
  if (meta.fingerprint != expected_fingerprint)
    throw CheckpointError(
        "checkpoint " + path.string() +
        ": config fingerprint mismatch (archive was written for a different "
        "model configuration)");

  const auto count = rd<std::uint32_t>(in);
  std::map<std::string, nn::Mat> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = read_string(in);
    const auto rows = rd<std::uint64_t>(in);
    const auto cols = rd<std::uint64_t>(in);
    nn::Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rd<double>(in);
    tensors[std::move(name)] = std::move(m);
  }
  if (!in) throw CheckpointError("checkpoint " + path.string() + ": truncated");

  for (nn::Param* p : params) {
    auto it = tensors.find(p->name);
    if (it == tensors.end())
      throw CheckpointError("checkpoint " + path.string() + ": missing tensor " +
                            p->name);
    if (it->second.rows() != p->value.rows() ||
        it->second.cols() != p->value.cols())
      throw CheckpointError("checkpoint " + path.string() +
                            ": shape mismatch for " + p->name);
    p->value = it->second;
    if (load_adam) {
      auto im = tensors.find("adam.m." + p->name);
      auto iv = tensors.find("adam.v." + p->name);
      if (im == tensors.end() || iv == tensors.end())
        throw CheckpointError("checkpoint " + path.string() +
                              ": missing Adam state for " + p->name);
      p->adam_m = im->second;
      p->adam_v = iv->second;
    }
  }
  return meta;
}

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return read_header(in, path.string());
}

}  // namespace vmr
