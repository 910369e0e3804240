#include "relgp/params.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace relgp {

namespace {

std::vector<double> init_values(const std::string& name, const Shape& shape,
                                const InitSpec& init, uint64_t seed) {
  size_t n = static_cast<size_t>(shape.numel());
  std::vector<double> out(n, 0.0);
  if (init.kind == InitKind::Zeros) return out;

  uint64_t name_hash = 1469598103934665603ull;
  for (char c : name) {
    name_hash ^= static_cast<unsigned char>(c);
    name_hash *= 1099511628211ull;
  }
  Rng rng = keyed_rng({seed, name_hash});

  switch (init.kind) {
    case InitKind::Uniform:
      for (double& x : out) x = rng.uniform(-init.scale, init.scale);
      break;
    case InitKind::Normal:
      for (double& x : out) x = rng.normal() * init.scale;
      break;
    case InitKind::Glorot: {
      int64_t fan_in = shape.rank() >= 1 ? shape.dims[0] : 1;
      int64_t fan_out = shape.rank() >= 2 ? shape.dims[1] : fan_in;
      double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (double& x : out) x = rng.uniform(-a, a);
      break;
    }
    case InitKind::Zeros:
      break;
  }
  return out;
}

template <class T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_raw(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

constexpr uint32_t kCheckpointMagic = 0x4b504752;  // "RGPK"
constexpr uint32_t kCheckpointVersion = 1;

}  // namespace

Value ParameterStore::param(const std::string& name, Shape shape, InitSpec init,
                            bool frozen) {
  auto it = params_.find(name);
  if (it != params_.end()) {
    if (!(it->second.value.shape() == shape))
      raise(ErrorKind::ShapeMismatch, "parameter " + name + " shape changed");
    return it->second.value;
  }
  Value v = make_param(name, shape, init_values(name, shape, init, init_seed_), frozen);
  params_[name] = Entry{v, {}, {}};
  return v;
}

Value ParameterStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) raise(ErrorKind::ConfigError, "unknown parameter " + name);
  return it->second.value;
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [k, v] : params_) out.push_back(k);
  return out;
}

std::vector<double>& ParameterStore::data(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) raise(ErrorKind::ConfigError, "unknown parameter " + name);
  return it->second.value.node()->data;
}

const std::vector<double>& ParameterStore::grad(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) raise(ErrorKind::ConfigError, "unknown parameter " + name);
  return it->second.value.node()->grad;
}

bool ParameterStore::frozen(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) raise(ErrorKind::ConfigError, "unknown parameter " + name);
  return !it->second.value.node()->requires_grad;
}

bool ParameterStore::has_grad(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) raise(ErrorKind::ConfigError, "unknown parameter " + name);
  const auto& g = it->second.value.node()->grad;
  return !g.empty();
}

void ParameterStore::zero_grad() {
  for (auto& [k, e] : params_) e.value.node()->grad.clear();
}

void ParameterStore::set_frozen(const std::string& name, bool frozen) {
  auto it = params_.find(name);
  if (it == params_.end()) raise(ErrorKind::ConfigError, "unknown parameter " + name);
  it->second.value.node()->requires_grad = !frozen;
}

void ParameterStore::freeze_prefix(const std::string& prefix, bool frozen) {
  for (auto& [k, e] : params_)
    if (k.rfind(prefix, 0) == 0) e.value.node()->requires_grad = !frozen;
}

std::vector<double>& ParameterStore::moment1(const std::string& name) {
  auto& e = params_.at(name);
  if (e.m1.size() != e.value.data().size()) e.m1.assign(e.value.data().size(), 0.0);
  return e.m1;
}

std::vector<double>& ParameterStore::moment2(const std::string& name) {
  auto& e = params_.at(name);
  if (e.m2.size() != e.value.data().size()) e.m2.assign(e.value.data().size(), 0.0);
  return e.m2;
}

size_t ParameterStore::total_parameters() const {
  size_t n = 0;
  for (const auto& [k, e] : params_) n += e.value.data().size();
  return n;
}

size_t ParameterStore::trainable_parameters() const {
  size_t n = 0;
  for (const auto& [k, e] : params_)
    if (e.value.node()->requires_grad) n += e.value.data().size();
  return n;
}

void ParameterStore::save_checkpoint(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) raise(ErrorKind::IoError, "cannot write " + path);
  write_raw(os, kCheckpointMagic);
  write_raw(os, kCheckpointVersion);
  write_raw(os, static_cast<uint64_t>(params_.size()));
  for (const auto& [name, e] : params_) {  // std::map iterates in name order
    write_raw(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    const Shape& s = e.value.shape();
    write_raw(os, static_cast<uint32_t>(s.rank()));
    for (int64_t d : s.dims) write_raw(os, d);
    os.write(reinterpret_cast<const char*>(e.value.data().data()),
             static_cast<std::streamsize>(e.value.data().size() * sizeof(double)));
  }
  if (!os) raise(ErrorKind::IoError, "write failed for " + path);
}

void ParameterStore::load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) raise(ErrorKind::MissingFile, "cannot open " + path);
  if (read_raw<uint32_t>(is) != kCheckpointMagic)
    raise(ErrorKind::IoError, "bad checkpoint magic in " + path);
  if (read_raw<uint32_t>(is) != kCheckpointVersion)
    raise(ErrorKind::IoError, "unsupported checkpoint version in " + path);
  uint64_t count = read_raw<uint64_t>(is);
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t name_len = read_raw<uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    uint32_t rank = read_raw<uint32_t>(is);
    Shape shape;
    for (uint32_t r = 0; r < rank; ++r) shape.dims.push_back(read_raw<int64_t>(is));
    std::vector<double> data(static_cast<size_t>(shape.numel()));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!is) raise(ErrorKind::IoError, "truncated checkpoint " + path);
    auto it = params_.find(name);
    if (it != params_.end()) {
      if (!(it->second.value.shape() == shape))
        raise(ErrorKind::ShapeMismatch, "checkpoint shape mismatch for " + name);
      it->second.value.node()->data = std::move(data);
    } else {
      params_[name] = Entry{make_param(name, shape, std::move(data), false), {}, {}};
    }
  }
  bump_version();
}

std::map<std::string, std::vector<double>> ParameterStore::snapshot_values() const {
  std::map<std::string, std::vector<double>> out;
  for (const auto& [k, e] : params_) out[k] = e.value.data();
  return out;
}

void ParameterStore::restore_values(
    const std::map<std::string, std::vector<double>>& snap) {
  for (const auto& [k, v] : snap) {
    auto it = params_.find(k);
    if (it == params_.end()) raise(ErrorKind::ConfigError, "snapshot has unknown " + k);
    it->second.value.node()->data = v;
  }
  bump_version();
}

GradCheckReport check_gradients(const std::function<Value(ParameterStore&)>& f,
                                ParameterStore& store, double h,
                                size_t max_coords_per_param, uint64_t seed) {
  store.zero_grad();
  Value loss = f(store);
  backward(loss);

  GradCheckReport report;
  for (const std::string& name : store.names()) {
    if (store.frozen(name)) continue;
    std::vector<double>& data = store.data(name);
    const std::vector<double>& analytic = store.grad(name);
    if (analytic.empty()) continue;  // parameter not reachable from this loss

    size_t n = data.size();
    std::vector<size_t> coords;
    if (n <= max_coords_per_param) {
      for (size_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      Rng rng = keyed_rng({seed, n, coords.size(), std::hash<std::string>{}(name)});
      for (size_t i = 0; i < max_coords_per_param; ++i)
        coords.push_back(static_cast<size_t>(rng.below(n)));
    }

    for (size_t idx : coords) {
      double saved = data[idx];
      data[idx] = saved + h;
      double up = f(store).scalar();
      data[idx] = saved - h;
      double down = f(store).scalar();
      data[idx] = saved;
      double numeric = (up - down) / (2.0 * h);
      double a = analytic[idx];
      double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-5});
      double rel = std::fabs(a - numeric) / denom;
      ++report.coords_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = name;
        report.worst_index = static_cast<int64_t>(idx);
      }
    }
  }
  return report;
}

}  // namespace relgp
