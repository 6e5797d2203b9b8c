#include "vrprl/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "vrprl/errors.hpp"

namespace vrprl::nn {

namespace fs = std::filesystem;

namespace {

constexpr const char* kMagic = "vrprl-checkpoint";
constexpr const char* kManifest = "manifest.txt";

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void put_f64(std::string& out, double x) {
  const auto u = std::bit_cast<std::uint64_t>(x);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((u >> (8 * b)) & 0xffU));
}

double get_f64(const std::string& in, std::size_t at) {
  std::uint64_t u = 0;
  for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + static_cast<std::size_t>(b)])) << (8 * b);
  return std::bit_cast<double>(u);
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

bool has_space(const std::string& s) { return s.empty() || s.find_first_of(" \t\r\n") != std::string::npos; }

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string shape_text(const Tensor& t) {
  std::string s;
  for (std::size_t i = 0; i < t.shape().size(); ++i) {
    if (i) s += ',';
    s += std::to_string(t.shape()[i]);
  }
  return s;
}

std::vector<int> parse_shape(const std::string& s) {
  std::vector<int> shape;
  std::istringstream is(s);
  std::string part;
  while (std::getline(is, part, ',')) {
    try {
      shape.push_back(std::stoi(part));
    } catch (const std::exception&) {
      throw LoadError("bad shape '" + s + "' in manifest");
    }
  }
  return shape;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& dir) {
  fs::create_directories(dir);

  std::string blob;
  std::ostringstream manifest;
  std::ostringstream tensors;
  for (const auto& [group, store] : ckpt.groups) {
    if (has_space(group)) throw ConfigError("checkpoint group names may not contain whitespace");
    for (const auto& [name, t] : store.all()) {
      if (has_space(name)) throw ConfigError("parameter names may not contain whitespace");
      tensors << "tensor " << group << ' ' << name << " f64 " << shape_text(t) << ' ' << blob.size() << '\n';
      for (double x : t.values()) put_f64(blob, x);
    }
    tensors << "version " << group << ' ' << store.version() << '\n';
  }
  const std::uint64_t sum = fnv1a(blob);
  const std::string blob_name = "params-" + hex(sum) + ".bin";

  manifest << kMagic << ' ' << kCheckpointFormatVersion << '\n';
  manifest << "blob " << blob_name << ' ' << blob.size() << ' ' << hex(sum) << '\n';
  for (const auto& [k, v] : ckpt.meta) {
    if (has_space(k) || v.find('\n') != std::string::npos) throw ConfigError("bad checkpoint meta entry '" + k + "'");
    manifest << "meta " << k << ' ' << v << '\n';
  }
  manifest << tensors.str();

  const fs::path blob_path = dir / blob_name;
  const fs::path blob_tmp = dir / (blob_name + ".tmp");
  write_file(blob_tmp, blob);
  fs::rename(blob_tmp, blob_path);

  const fs::path manifest_tmp = dir / (std::string(kManifest) + ".tmp");
  write_file(manifest_tmp, manifest.str());
  fs::rename(manifest_tmp, dir / kManifest);

  // Older blobs are unreachable once the manifest is in place.
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string fname = entry.path().filename().string();
    if (fname != blob_name && fname.rfind("params-", 0) == 0 && entry.path().extension() == ".bin") {
      std::error_code ec;
      fs::remove(entry.path(), ec);
    }
  }
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const std::string text = read_file(dir / kManifest);
  std::istringstream in(text);
  std::string line;

  if (!std::getline(in, line)) throw LoadError("empty checkpoint manifest");
  {
    std::istringstream hs(line);
    std::string magic;
    int version = -1;
    hs >> magic >> version;
    if (magic != kMagic) throw LoadError("not a checkpoint manifest: '" + dir.string() + "'");
    if (version != kCheckpointFormatVersion)
      throw LoadError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointFormatVersion) + ")");
  }

  struct Entry {
    std::string group, name;
    std::vector<int> shape;
    std::size_t offset;
  };
  std::vector<Entry> entries;
  std::map<std::string, std::uint64_t> versions;
  Checkpoint ckpt;
  std::string blob_name, blob_sum;
  std::size_t blob_size = 0;

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "blob") {
      ls >> blob_name >> blob_size >> blob_sum;
    } else if (kind == "meta") {
      std::string key, value;
      ls >> key;
      std::getline(ls >> std::ws, value);
      ckpt.meta[key] = value;
    } else if (kind == "tensor") {
      Entry e;
      std::string dtype, shape;
      ls >> e.group >> e.name >> dtype >> shape >> e.offset;
      if (!ls || dtype != "f64") throw LoadError("bad tensor line in manifest: " + line);
      e.shape = parse_shape(shape);
      entries.push_back(std::move(e));
    } else if (kind == "version") {
      std::string group;
      std::uint64_t v = 0;
      ls >> group >> v;
      versions[group] = v;
    } else {
      throw LoadError("unknown manifest line: " + line);
    }
  }
  if (blob_name.empty()) throw LoadError("manifest names no blob");

  const std::string blob = read_file(dir / blob_name);
  if (blob.size() != blob_size)
    throw LoadError("blob '" + blob_name + "' has " + std::to_string(blob.size()) + " bytes, manifest says " +
                    std::to_string(blob_size));
  if (hex(fnv1a(blob)) != blob_sum) throw LoadError("blob '" + blob_name + "' checksum mismatch");

  for (const auto& e : entries) {
    std::size_t count = 1;
    for (int d : e.shape) {
      if (d <= 0) throw LoadError("non-positive dimension for '" + e.name + "'");
      count *= static_cast<std::size_t>(d);
    }
    if (e.offset + count * 8 > blob.size()) throw LoadError("tensor '" + e.name + "' runs past the blob");
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) values[i] = get_f64(blob, e.offset + 8 * i);
    ckpt.groups[e.group].add(e.name, Tensor(e.shape, std::move(values)));
  }
  for (const auto& [group, v] : versions) ckpt.groups[group].set_version(v);
  return ckpt;
}

void require_meta(const Checkpoint& ckpt, const std::map<std::string, std::string>& expected) {
  for (const auto& [k, v] : expected) {
    auto it = ckpt.meta.find(k);
    if (it == ckpt.meta.end()) throw LoadError("checkpoint lacks '" + k + "'");
    if (it->second != v)
      throw LoadError("incompatible checkpoint: " + k + " is " + it->second + ", this run needs " + v);
  }
}

void load_group_into(const Checkpoint& ckpt, const std::string& group, ParamStore& target) {
  auto it = ckpt.groups.find(group);
  if (it == ckpt.groups.end()) throw LoadError("checkpoint has no group '" + group + "'");
  const ParamStore& src = it->second;
  if (src.names() != target.names()) throw LoadError("checkpoint group '" + group + "' has different parameters");
  for (const auto& name : target.names()) {
    const Tensor& s = src.get(name);
    if (s.shape() != target.get(name).shape())
      throw LoadError("incompatible checkpoint: '" + name + "' has shape " + s.shape_string() + ", this run needs " +
                      target.get(name).shape_string());
  }
  for (const auto& name : target.names()) target.get_mutable(name) = src.get(name);
  target.set_version(src.version());
}

}  // namespace vrprl::nn
