#include "manet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "manet/config.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

namespace manet {

namespace {

constexpr char kMagic[4] = {'M', 'A', 'N', 'C'};

void put_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}
void put_u64(std::ostream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}
void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t get_u32(std::istream& in, const std::string& path) {
  uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) {
    throw std::runtime_error("checkpoint: truncated file " + path);
  }
  return v;
}
uint64_t get_u64(std::istream& in, const std::string& path) {
  uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 8)) {
    throw std::runtime_error("checkpoint: truncated file " + path);
  }
  return v;
}
std::string get_string(std::istream& in, const std::string& path) {
  uint32_t len = get_u32(in, path);
  std::string s(len, '\0');
  if (!in.read(s.data(), len)) {
    throw std::runtime_error("checkpoint: truncated file " + path);
  }
  return s;
}

std::ifstream open_and_check_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("checkpoint: cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  uint32_t version = get_u32(in, path);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) +
                             " in " + path);
  }
  return in;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ParamRegistry& reg) {
  if (reg.counting_only()) {
    throw std::logic_error("save_checkpoint: counting registry holds no data");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_string(out, canonical_model_text(cfg));
  put_u32(out, static_cast<uint32_t>(reg.size()));
  for (size_t i = 0; i < reg.size(); ++i) {
    const Parameter& p = reg.at(i);
    put_string(out, p.name);
    char trainable = p.trainable ? 1 : 0;
    out.write(&trainable, 1);
    put_u32(out, static_cast<uint32_t>(p.shape.size()));
    for (int d : p.shape) {
      int32_t v = d;
      out.write(reinterpret_cast<const char*>(&v), 4);
    }
    put_u64(out, p.numel());
    out.write(reinterpret_cast<const char*>(p.tensor.ptr()),
              static_cast<std::streamsize>(p.numel() * 4));
  }
  if (!out) throw std::runtime_error("checkpoint: short write to " + path);
}

ModelConfig peek_checkpoint_config(const std::string& path) {
  std::ifstream in = open_and_check_header(path);
  return parse_model_text(get_string(in, path));
}

ModelConfig load_checkpoint(const std::string& path, ParamRegistry& reg) {
  if (reg.counting_only()) {
    throw std::logic_error("load_checkpoint: counting registry holds no data");
  }
  std::ifstream in = open_and_check_header(path);
  ModelConfig cfg = parse_model_text(get_string(in, path));

  uint32_t count = get_u32(in, path);
  if (count != reg.size()) {
    throw std::runtime_error("checkpoint: " + path + " holds " + std::to_string(count) +
                             " parameters, model expects " + std::to_string(reg.size()));
  }
  for (uint32_t i = 0; i < count; ++i) {
    Parameter& p = reg.at(i);
    std::string name = get_string(in, path);
    if (name != p.name) {
      throw std::runtime_error("checkpoint: " + path + ": parameter " + std::to_string(i) +
                               " is '" + name + "', model expects '" + p.name + "'");
    }
    char trainable = 0;
    if (!in.read(&trainable, 1)) throw std::runtime_error("checkpoint: truncated file " + path);
    if ((trainable != 0) != p.trainable) {
      throw std::runtime_error("checkpoint: " + path + ": trainable flag mismatch on " + name);
    }
    uint32_t ndim = get_u32(in, path);
    std::vector<int> shape(ndim);
    for (uint32_t d = 0; d < ndim; ++d) {
      int32_t v = 0;
      if (!in.read(reinterpret_cast<char*>(&v), 4)) {
        throw std::runtime_error("checkpoint: truncated file " + path);
      }
      shape[d] = v;
    }
    if (shape != p.shape) {
      throw std::runtime_error("checkpoint: " + path + ": shape mismatch on " + name);
    }
    uint64_t numel = get_u64(in, path);
    if (numel != p.numel()) {
      throw std::runtime_error("checkpoint: " + path + ": element count mismatch on " + name);
    }
    if (!in.read(reinterpret_cast<char*>(p.tensor.impl()->data.data()),
                 static_cast<std::streamsize>(numel * 4))) {
      throw std::runtime_error("checkpoint: truncated file " + path);
    }
  }
  return cfg;
}

}  // namespace manet
