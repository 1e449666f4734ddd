#include "actrans/nn/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace actrans::nn {

namespace {

constexpr char kMagic[6] = {'A', 'C', 'K', 'P', 'T', '1'};

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

void put_f32(std::string& out, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(out, v);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw truncation_error("checkpoint truncated");
  }
  std::uint16_t u16() {
    need(2);
    const auto lo = static_cast<unsigned char>(buf[pos]);
    const auto hi = static_cast<unsigned char>(buf[pos + 1]);
    pos += 2;
    return static_cast<std::uint16_t>(lo | (hi << 8));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i]))
           << (8 * i);
    pos += 4;
    return v;
  }
  float f32() {
    const std::uint32_t v = u32();
    float f;
    std::memcpy(&f, &v, 4);
    return f;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

const std::string& CheckpointManifest::at(const std::string& key) const {
  const auto it = entries.find(key);
  if (it == entries.end())
    throw format_error("checkpoint manifest missing key: " + key);
  return it->second;
}

int CheckpointManifest::get_int(const std::string& key) const {
  return std::stoi(at(key));
}

double CheckpointManifest::get_double(const std::string& key) const {
  return std::stod(at(key));
}

void CheckpointManifest::set_int(const std::string& key, long v) {
  entries[key] = std::to_string(v);
}

void CheckpointManifest::set_double(const std::string& key, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  entries[key] = buf;
}

const Tensor<float>& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw format_error("checkpoint missing tensor: " + name);
}

std::string checkpoint_bytes(const Checkpoint& ckpt) {
  std::string out;
  out.append(kMagic, 6);

  std::string manifest;
  for (const auto& [k, v] : ckpt.manifest.entries)
    manifest += k + " = " + v + "\n";
  put_u32(out, static_cast<std::uint32_t>(manifest.size()));
  out += manifest;

  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    out.push_back(4);  // always 4 dims (NCHW)
    put_u32(out, static_cast<std::uint32_t>(t.n()));
    put_u32(out, static_cast<std::uint32_t>(t.c()));
    put_u32(out, static_cast<std::uint32_t>(t.h()));
    put_u32(out, static_cast<std::uint32_t>(t.w()));
    for (Eigen::Index i = 0; i < t.data.size(); ++i) put_f32(out, t.data[i]);
  }
  return out;
}

void save_checkpoint(const Checkpoint& ckpt,
                     const std::filesystem::path& path) {
  const std::string bytes = checkpoint_bytes(ckpt);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw io_error("cannot write " + path.string());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw io_error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  const std::string buf = ss.str();

  if (buf.size() < 6 || std::memcmp(buf.data(), kMagic, 6) != 0)
    throw format_error("not an ACKPT1 file: " + path.string());
  Reader r{buf, 6};

  Checkpoint ckpt;
  const std::uint32_t mlen = r.u32();
  std::istringstream ms(r.bytes(mlen));
  std::string line;
  while (std::getline(ms, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    ckpt.manifest.entries[line.substr(0, eq)] = line.substr(eq + 3);
  }

  const std::uint32_t n_tensors = r.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::uint16_t name_len = r.u16();
    const std::string name = r.bytes(name_len);
    r.need(1);
    const int ndim = static_cast<unsigned char>(buf[r.pos++]);
    if (ndim != 4) throw format_error("unexpected tensor rank");
    const int n = static_cast<int>(r.u32());
    const int c = static_cast<int>(r.u32());
    const int h = static_cast<int>(r.u32());
    const int w = static_cast<int>(r.u32());
    Tensor<float> t(n, c, h, w);
    for (Eigen::Index j = 0; j < t.data.size(); ++j) t.data[j] = r.f32();
    ckpt.tensors.emplace_back(name, std::move(t));
  }
  return ckpt;
}

}  // namespace actrans::nn
