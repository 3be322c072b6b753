#include "mscal/grid.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <string>

#include "mscal/parallel.hpp"
#include "mscal/physics.hpp"

static_assert(std::endian::native == std::endian::little,
              "grid files are little-endian; big-endian hosts need byte swaps");

namespace mscal {

namespace {

constexpr char kMagic[8] = {'M', 'S', 'C', 'A', 'L', 'G', 'R', 'D'};
constexpr std::uint32_t kVersion = 1;

void put_bytes(std::vector<std::uint8_t>& buf, const void* p, std::size_t n) {
  const auto* b = static_cast<const std::uint8_t*>(p);
  buf.insert(buf.end(), b, b + n);
}
template <class T>
void put(std::vector<std::uint8_t>& buf, T v) {
  put_bytes(buf, &v, sizeof v);
}

class Reader {
 public:
  Reader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}
  template <class T>
  T get() {
    if (pos_ + sizeof(T) > n_) throw std::runtime_error("corrupt grid file");
    T v;
    std::memcpy(&v, p_ + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  std::size_t remaining() const { return n_ - pos_; }

 private:
  const std::uint8_t* p_;
  std::size_t n_, pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t model_digest(const ModelConfig& cfg) {
  std::vector<std::uint8_t> buf;
  put(buf, cfg.lamb_dicke);
  put(buf, cfg.gate_time);
  put(buf, cfg.ramp_time);
  put(buf, std::int64_t(cfg.loops));
  put(buf, std::int64_t(cfg.initial_fock));
  return fnv1a(buf.data(), buf.size());
}

void GridSpec::validate() const {
  for (const GridAxis& ax : axes) {
    if (ax.count < 4) throw std::invalid_argument("grid axis needs at least 4 samples");
    if (!(ax.min < ax.max)) throw std::invalid_argument("grid axis range empty");
  }
  if (setting.n_gates < 1) throw std::invalid_argument("grid setting invalid");
}

GridSpec multi_gate_grid_spec(const MeasurementSetting& setting, const ModelConfig& cfg) {
  GridSpec spec;
  spec.axes = {GridAxis{0.5, 1.5, 21}, GridAxis{-two_pi * 3.5e3, two_pi * 3.5e3, 21},
               GridAxis{two_pi * 5.0e3, two_pi * 15.0e3, 21}, GridAxis{-pi, pi, 25}};
  spec.setting = setting;
  spec.digest = model_digest(cfg);
  return spec;
}

GridSpec single_gate_grid_spec(const ModelConfig& cfg) {
  GridSpec spec = multi_gate_grid_spec({1, 0.0}, cfg);
  spec.axes[1] = {-two_pi * 7.0e3, two_pi * 7.0e3, 21};
  spec.axes[2] = {0.0, two_pi * 20.0e3, 21};
  return spec;
}

GridSpec test_scale_grid_spec(const MeasurementSetting& setting, const ModelConfig& cfg) {
  GridSpec spec =
      setting.n_gates == 1 ? single_gate_grid_spec(cfg) : multi_gate_grid_spec(setting, cfg);
  spec.setting = setting;
  for (int a = 0; a < 4; ++a) {
    const double mid = 0.5 * (spec.axes[a].min + spec.axes[a].max);
    const double half = 0.25 * (spec.axes[a].max - spec.axes[a].min);
    spec.axes[a] = {mid - half, mid + half, a == 3 ? 13 : 9};
  }
  return spec;
}

GridTable build_grid(const GridSpec& spec, const ModelConfig& cfg, unsigned threads) {
  spec.validate();
  cfg.validate();
  if (model_digest(cfg) != spec.digest)
    throw std::invalid_argument("model does not match grid digest");

  const double rabi_ref = rabi_opt(cfg);
  const std::size_t count = spec.node_count();
  GridTable table{spec, std::vector<double>(count * 3)};

  std::mutex failure_mutex;
  std::vector<std::pair<std::size_t, std::string>> failures;

  const int n1 = spec.axes[1].count, n2 = spec.axes[2].count, n3 = spec.axes[3].count;
  parallel_for(
      count,
      [&](std::size_t idx) {
        std::size_t rest = idx;
        const int i3 = int(rest % n3);
        rest /= n3;
        const int i2 = int(rest % n2);
        rest /= n2;
        const int i1 = int(rest % n1);
        const int i0 = int(rest / n1);
        GateParams theta{spec.axes[0].node(i0) * rabi_ref, spec.axes[1].node(i1),
                         spec.axes[2].node(i2), spec.axes[3].node(i3)};
        try {
          OutcomeDistribution p = outcome_probabilities(theta, cfg, spec.setting);
          table.values[idx * 3 + 0] = p.p_gg;
          table.values[idx * 3 + 1] = p.p_one;
          table.values[idx * 3 + 2] = p.p_ee;
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          failures.emplace_back(idx, e.what());
        }
      },
      threads);

  if (!failures.empty()) {
    std::sort(failures.begin(), failures.end());
    throw std::runtime_error("grid build failed at " + std::to_string(failures.size()) +
                             " node(s); first: node " + std::to_string(failures.front().first) +
                             ": " + failures.front().second);
  }
  return table;
}

void save_grid(const GridTable& table, const std::filesystem::path& path) {
  table.spec.validate();
  if (table.values.size() != table.spec.node_count() * 3)
    throw std::invalid_argument("grid table size mismatch");

  std::vector<std::uint8_t> buf;
  buf.reserve(table.values.size() * 8 + 256);
  put_bytes(buf, kMagic, sizeof kMagic);
  put(buf, kVersion);
  const std::size_t payload_start = buf.size();
  for (const GridAxis& ax : table.spec.axes) {
    put(buf, ax.min);
    put(buf, ax.max);
    put(buf, std::int64_t(ax.count));
  }
  put(buf, std::int64_t(table.spec.setting.n_gates));
  put(buf, table.spec.setting.phase_target);
  put(buf, table.spec.digest);
  put_bytes(buf, table.values.data(), table.values.size() * sizeof(double));
  put(buf, fnv1a(buf.data() + payload_start, buf.size() - payload_start));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write grid file: " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
  if (!out) throw std::runtime_error("cannot write grid file: " + path.string());
}

GridTable load_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read grid file: " + path.string());
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());

  if (buf.size() < sizeof kMagic || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("unsupported grid file");
  Reader rd(buf.data() + sizeof kMagic, buf.size() - sizeof kMagic);
  if (rd.get<std::uint32_t>() != kVersion) throw std::runtime_error("unsupported grid file");

  GridTable table;
  for (GridAxis& ax : table.spec.axes) {
    ax.min = rd.get<double>();
    ax.max = rd.get<double>();
    ax.count = int(rd.get<std::int64_t>());
  }
  table.spec.setting.n_gates = int(rd.get<std::int64_t>());
  table.spec.setting.phase_target = rd.get<double>();
  table.spec.digest = rd.get<std::uint64_t>();
  try {
    table.spec.validate();
  } catch (const std::invalid_argument&) {
    throw std::runtime_error("corrupt grid file");
  }

  const std::size_t n_values = table.spec.node_count() * 3;
  if (rd.remaining() != n_values * sizeof(double) + sizeof(std::uint64_t))
    throw std::runtime_error("corrupt grid file");
  table.values.resize(n_values);
  const std::size_t payload = buf.size() - sizeof(std::uint64_t) - sizeof kMagic - 4;
  std::memcpy(table.values.data(), buf.data() + (buf.size() - 8 - n_values * 8), n_values * 8);
  std::uint64_t stored;
  std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
  if (fnv1a(buf.data() + sizeof kMagic + 4, payload) != stored)
    throw std::runtime_error("corrupt grid file");
  return table;
}

Interpolator::Interpolator(const GridTable& table) : spec_(table.spec) {
  spec_.validate();
  if (table.values.size() != spec_.node_count() * 3)
    throw std::invalid_argument("grid table size mismatch");
  spline_ = Spline4(spec_.axes, 3, table.values);
}

OutcomeDistribution Interpolator::query(const std::array<double, 4>& coords) const {
  double p[3];
  spline_.evaluate(coords, p);
  double sum = 0.0;
  for (double& v : p) {
    v = std::min(1.0, std::max(0.0, v));
    sum += v;
  }
  if (sum < 1e-9) return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  return {p[0] / sum, p[1] / sum, p[2] / sum};
}

}  // namespace mscal
