#include "mhqg/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "mhqg/common.hpp"

namespace mhqg {

namespace {

constexpr char kMagic[8] = {'M', 'H', 'Q', 'G', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

// Fixed little-endian layout; this codebase targets little-endian hosts.
template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("truncated checkpoint file");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto len = get<std::uint64_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("truncated checkpoint file");
  return s;
}

void put_tensor_values(std::ostream& out, const num::Tensor& t) {
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
}

void get_tensor_values(std::istream& in, num::Tensor& t) {
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!in) throw DataError("truncated checkpoint file");
}

void read_header(std::istream& in, CheckpointMeta& meta) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw DataError("not a checkpoint file (bad magic)");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  meta.config_json = get_string(in);
  meta.vocab_digest = get_string(in);
  meta.epoch = get<std::uint64_t>(in);
  meta.best_dev_bleu4 = get<double>(in);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<num::Parameter*>& params, const num::Adam* optimizer,
                     const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());

  out.write(kMagic, 8);
  put<std::uint32_t>(out, kVersion);
  put_string(out, meta.config_json);
  put_string(out, meta.vocab_digest);
  put<std::uint64_t>(out, meta.epoch);
  put<double>(out, meta.best_dev_bleu4);

  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const num::Parameter* p : params) {
    put_string(out, p->name);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(p->value.rank()));
    for (std::size_t e : p->value.shape()) put<std::uint64_t>(out, e);
    put_tensor_values(out, p->value);
  }

  put<std::uint8_t>(out, optimizer != nullptr ? 1 : 0);
  if (optimizer != nullptr) {
    auto* opt = const_cast<num::Adam*>(optimizer);
    put<std::uint64_t>(out, opt->steps_taken());
    put<double>(out, opt->lr());
    for (std::size_t i = 0; i < params.size(); ++i) {
      put_tensor_values(out, opt->first_moments()[i]);
      put_tensor_values(out, opt->second_moments()[i]);
    }
  }
  if (!out) throw DataError("checkpoint write failed: " + path.string());
}

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  CheckpointMeta meta;
  read_header(in, meta);
  return meta;
}

void load_checkpoint(const std::filesystem::path& path,
                     const std::vector<num::Parameter*>& params, num::Adam* optimizer,
                     CheckpointMeta* meta_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());

  CheckpointMeta meta;
  read_header(in, meta);
  if (meta_out != nullptr) *meta_out = meta;

  const auto count = get<std::uint32_t>(in);
  if (count != params.size()) {
    throw DataError("checkpoint has " + std::to_string(count) + " parameters, model has " +
                    std::to_string(params.size()));
  }
  for (num::Parameter* p : params) {
    const std::string name = get_string(in);
    if (name != p->name) {
      throw DataError("checkpoint parameter '" + name + "' does not match model parameter '" +
                      p->name + "'");
    }
    const auto rank = get<std::uint8_t>(in);
    std::vector<std::size_t> shape;
    for (std::uint8_t r = 0; r < rank; ++r) shape.push_back(get<std::uint64_t>(in));
    if (shape != p->value.shape()) {
      throw DataError("checkpoint parameter '" + name + "' has shape " + num::shape_str(shape) +
                      ", model expects " + p->value.shape_str());
    }
    get_tensor_values(in, p->value);
  }

  const auto has_optimizer = get<std::uint8_t>(in);
  if (has_optimizer == 1 && optimizer != nullptr) {
    optimizer->set_steps_taken(get<std::uint64_t>(in));
    optimizer->set_lr(get<double>(in));
    for (std::size_t i = 0; i < params.size(); ++i) {
      get_tensor_values(in, optimizer->first_moments()[i]);
      get_tensor_values(in, optimizer->second_moments()[i]);
    }
  }
}

}  // namespace mhqg
