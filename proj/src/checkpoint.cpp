#include "compdiff/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "compdiff/errors.hpp"

namespace compdiff {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

constexpr char kMagic[4] = {'C', 'D', 'F', '1'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const unsigned char* p, std::size_t n) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

struct Writer {
  std::vector<unsigned char> buf;
  template <typename T>
  void put(T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    buf.insert(buf.end(), b, b + sizeof(T));
  }
};

struct Reader {
  const unsigned char* p;
  std::size_t n, off = 0;
  template <typename T>
  T get() {
    if (off + sizeof(T) > n)
      throw CheckpointError(CheckpointFault::Truncated,
                            "checkpoint truncated: unexpected end of file");
    T v;
    std::memcpy(&v, p + off, sizeof(T));
    off += sizeof(T);
    return v;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const NeuralModel& model) {
  const NoiseSchedule& s = model.schedule();
  const MlpArch& a = model.arch();

  Writer w;
  w.buf.insert(w.buf.end(), kMagic, kMagic + 4);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(model.parameterization()));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(s.kind()));
  w.put<std::uint16_t>(0);
  w.put<std::int32_t>(s.steps());
  w.put<double>(s.beta_min());
  w.put<double>(s.beta_max());
  w.put<std::int32_t>(a.hidden);
  w.put<std::int32_t>(a.blocks);
  w.put<std::int32_t>(a.time_embed);
  w.put<std::uint64_t>(model.params().size());
  for (double x : model.params()) w.put<double>(x);
  w.put<std::uint64_t>(fnv1a(w.buf.data(), w.buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);
  out.write(reinterpret_cast<const char*>(w.buf.data()),
            static_cast<std::streamsize>(w.buf.size()));
  if (!out) throw ConfigError("failed writing checkpoint: " + path);
}

NeuralModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw CheckpointError(CheckpointFault::Truncated,
                          "cannot open checkpoint: " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());

  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw CheckpointError(CheckpointFault::BadMagic,
                          "not a model checkpoint (bad magic): " + path);
  if (buf.size() < 4 + 4 + 8)
    throw CheckpointError(CheckpointFault::Truncated,
                          "checkpoint truncated: " + path);

  // Checksum covers everything before the trailing 8 bytes.
  std::uint64_t stored;
  std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
  if (fnv1a(buf.data(), buf.size() - 8) != stored)
    throw CheckpointError(CheckpointFault::ChecksumMismatch,
                          "checkpoint checksum mismatch: " + path);

  Reader r{buf.data(), buf.size() - 8};
  r.off = 4;
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion)
    throw CheckpointError(CheckpointFault::VersionMismatch,
                          "checkpoint version " + std::to_string(version) +
                              " not supported (expected " +
                              std::to_string(kVersion) + ")");

  const auto param_raw = r.get<std::uint8_t>();
  const auto kind_raw = r.get<std::uint8_t>();
  (void)r.get<std::uint16_t>();
  const auto T = r.get<std::int32_t>();
  const auto beta_min = r.get<double>();
  const auto beta_max = r.get<double>();
  MlpArch arch;
  arch.hidden = r.get<std::int32_t>();
  arch.blocks = r.get<std::int32_t>();
  arch.time_embed = r.get<std::int32_t>();
  const auto n_params = r.get<std::uint64_t>();

  if (param_raw > 3 || kind_raw > 1)
    throw CheckpointError(CheckpointFault::ArchMismatch,
                          "checkpoint declares an unknown parameterization or "
                          "schedule kind");
  if (arch.hidden < 1 || arch.blocks < 0 || arch.time_embed < 4 ||
      arch.time_embed % 2 != 0)
    throw CheckpointError(CheckpointFault::ArchMismatch,
                          "checkpoint declares an invalid architecture: " + path);
  auto sched = [&]() -> NoiseSchedule {
    try {
      return kind_raw == 0 ? NoiseSchedule::linear(T, beta_min, beta_max)
                           : NoiseSchedule::cosine(T);
    } catch (const ConfigError&) {
      throw CheckpointError(CheckpointFault::ArchMismatch,
                            "checkpoint declares an invalid schedule: " + path);
    }
  }();
  if (n_params != param_count(arch))
    throw CheckpointError(
        CheckpointFault::ArchMismatch,
        "checkpoint weight count does not match its architecture");
  if (r.n - r.off != n_params * sizeof(double))
    throw CheckpointError(CheckpointFault::Truncated,
                          "checkpoint truncated: weight block size mismatch");

  NeuralModel model(arch, static_cast<Parameterization>(param_raw),
                    std::move(sched), /*init_seed=*/0);
  for (std::size_t i = 0; i < n_params; ++i) model.params()[i] = r.get<double>();
  return model;
}

}  // namespace compdiff
