#include "tsg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_map>
#include <unordered_set>

namespace tsg {

namespace {

constexpr char kMagic[] = "TSGCKPT1";
constexpr std::size_t kMagicLen = 8;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u64(std::string& out, std::uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

void put_f32(std::string& out, float v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string path) : bytes_(bytes), path_(std::move(path)) {}

  bool done() const { return pos_ == bytes_.size(); }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(CheckpointError::Kind::Truncated,
                            "checkpoint " + path_ + ": truncated while reading " + what);
    }
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v;
    std::memcpy(&v, bytes_.data() + pos_, 8);
    pos_ += 8;
    return v;
  }

  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void f32s(std::vector<float>& out, std::size_t n, const char* what) {
    if (n > (bytes_.size() - pos_) / 4) need(bytes_.size() - pos_ + 1, what);
    out.resize(n);
    std::memcpy(out.data(), bytes_.data() + pos_, n * 4);
    pos_ += n * 4;
  }

 private:
  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const ParamStore& store, const std::filesystem::path& path) {
  std::string out(kMagic, kMagicLen);
  for (const Parameter& p : store.params()) {
    put_u64(out, p.name.size());
    out += p.name;
    put_u64(out, p.tensor.rank());
    for (std::size_t d : p.tensor.shape()) put_u64(out, d);
    for (Real v : p.tensor.data()) put_f32(out, static_cast<float>(v));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CheckpointError(CheckpointError::Kind::Io, "cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw CheckpointError(CheckpointError::Kind::Io, "write failed: " + path.string());
}

void load_checkpoint(ParamStore& store, const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError(CheckpointError::Kind::Io, "cannot read checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const std::string where = path.string();
  if (bytes.size() < kMagicLen || bytes.compare(0, kMagicLen, kMagic) != 0) {
    if (bytes.size() < kMagicLen && std::string(kMagic).compare(0, bytes.size(), bytes) == 0) {
      throw CheckpointError(CheckpointError::Kind::Truncated, "checkpoint " + where + ": truncated header");
    }
    throw CheckpointError(CheckpointError::Kind::BadMagic,
                          "checkpoint " + where + ": bad magic or unsupported version (expected TSGCKPT1)");
  }
  Reader r(bytes, where);
  r.str(kMagicLen, "magic");

  std::unordered_map<std::string, std::vector<float>> values;
  std::vector<std::string> unknown;
  while (!r.done()) {
    const std::uint64_t len = r.u64("name length");
    const std::string name = r.str(len, "parameter name");
    const std::uint64_t rank = r.u64("rank");
    if (rank > 8) throw CheckpointError(CheckpointError::Kind::Truncated, "checkpoint " + where + ": corrupt rank for '" + name + "'");
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = r.u64("dims");
      n *= d;
    }
    std::vector<float> v;
    r.f32s(v, n, "values");
    if (!store.contains(name)) {
      unknown.push_back(name);
      continue;
    }
    const Tensor& t = store.get(name);
    if (t.shape() != shape) {
      throw CheckpointError(CheckpointError::Kind::ShapeMismatch, "checkpoint " + where + ": parameter '" + name +
                                                                      "' has shape " + shape_str(shape) +
                                                                      ", model expects " + shape_str(t.shape()));
    }
    if (!values.emplace(name, std::move(v)).second) {
      throw CheckpointError(CheckpointError::Kind::Duplicate, "checkpoint " + where + ": duplicate parameter '" + name + "'");
    }
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& n : unknown) list += (list.empty() ? "" : ", ") + n;
    throw CheckpointError(CheckpointError::Kind::UnknownParameter,
                          "checkpoint " + where + ": unknown parameter(s): " + list);
  }
  std::string missing;
  for (const Parameter& p : store.params()) {
    if (!values.count(p.name)) missing += (missing.empty() ? "" : ", ") + p.name;
  }
  if (!missing.empty()) {
    throw CheckpointError(CheckpointError::Kind::MissingParameter,
                          "checkpoint " + where + ": missing parameter(s): " + missing);
  }
  for (const Parameter& p : store.params()) {
    Tensor t = p.tensor;
    const auto& v = values.at(p.name);
    auto dst = t.mutable_data();
    for (std::size_t i = 0; i < v.size(); ++i) dst[i] = static_cast<Real>(v[i]);
  }
}

}  // namespace tsg
