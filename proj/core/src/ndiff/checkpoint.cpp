#include "caire/ndiff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "caire/errors.hpp"

namespace caire::ndiff {

namespace {

constexpr char kMagic[8] = {'C', 'A', 'I', 'R', 'E', 'C', 'K', 'P'};

template <typename T>
void put(std::string& out, T v) {
  static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes a little-endian host");
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, s_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  bool done() const { return pos_ == s_.size(); }

 private:
  void need(std::size_t n) const {
    if (s_.size() - pos_ < n) throw Error("checkpoint truncated");
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_arrays(const NamedArrays& arrays) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, arr] : arrays) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(arr.rank()));
    for (auto d : arr.shape()) put<std::uint64_t>(out, d);
    for (double v : arr.values()) put<double>(out, v);
  }
  return out;
}

NamedArrays deserialize_arrays(const std::string& bytes) {
  Reader r(bytes);
  if (r.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) throw Error("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  NamedArrays out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name = r.bytes(name_len);
    const auto rank = r.get<std::uint32_t>();
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(r.get<std::uint64_t>());
      n *= d;
    }
    std::vector<double> values(n);
    for (auto& v : values) v = r.get<double>();
    out.emplace_back(std::move(name), Array(std::move(shape), std::move(values)));
  }
  if (!r.done()) throw Error("trailing bytes after checkpoint payload");
  return out;
}

void save_arrays(const std::filesystem::path& path, const NamedArrays& arrays) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  const std::string bytes = serialize_arrays(arrays);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

NamedArrays load_arrays(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_arrays(bytes);
}

NamedArrays param_values(const ParamStore& store) {
  NamedArrays out;
  for (const auto& p : store.entries()) out.emplace_back(p.name, p.value);
  return out;
}

void restore_params(ParamStore& store, const NamedArrays& arrays) {
  for (auto& p : store.entries()) {
    const Array* found = nullptr;
    for (const auto& [name, arr] : arrays)
      if (name == p.name) found = &arr;
    if (!found) throw Error("checkpoint is missing parameter '" + p.name + "'");
    if (found->shape() != p.value.shape())
      throw ShapeError("parameter '" + p.name + "' has shape " + shape_string(found->shape()) + " in checkpoint, " +
                       shape_string(p.value.shape()) + " in model");
    p.value = *found;
  }
}

}  // namespace caire::ndiff
