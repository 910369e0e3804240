#pragma once

// Named trainable arrays with gradients and per-parameter optimizer state.
// Initialization is keyed by (init_seed, name) so parameter values do not
// depend on creation order.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "relgp/tensor.hpp"

namespace relgp {

enum class InitKind { Zeros, Uniform, Normal, Glorot };

struct InitSpec {
  InitKind kind = InitKind::Glorot;
  double scale = 0.02;  // half-width for Uniform, stddev for Normal

  static InitSpec zeros() { return {InitKind::Zeros, 0.0}; }
  static InitSpec uniform(double half_width) { return {InitKind::Uniform, half_width}; }
  static InitSpec normal(double stddev) { return {InitKind::Normal, stddev}; }
  static InitSpec glorot() { return {InitKind::Glorot, 0.0}; }
};

class ParameterStore {
 public:
  explicit ParameterStore(uint64_t init_seed = 0) : init_seed_(init_seed) {}

  // Returns the existing parameter or creates it with the given init.
  Value param(const std::string& name, Shape shape, InitSpec init = InitSpec::glorot(),
              bool frozen = false);

  bool has(const std::string& name) const { return params_.count(name) > 0; }
  Value get(const std::string& name) const;
  std::vector<std::string> names() const;  // sorted

  std::vector<double>& data(const std::string& name);
  const std::vector<double>& grad(const std::string& name) const;
  bool frozen(const std::string& name) const;
  bool has_grad(const std::string& name) const;

  void zero_grad();
  void set_frozen(const std::string& name, bool frozen);
  void freeze_prefix(const std::string& prefix, bool frozen = true);

  // Per-parameter optimizer slots (first and second moment), sized lazily.
  std::vector<double>& moment1(const std::string& name);
  std::vector<double>& moment2(const std::string& name);

  // Bumped on every optimizer step; used to invalidate embedding caches.
  uint64_t version() const { return version_; }
  void bump_version() { ++version_; }

  size_t total_parameters() const;
  size_t trainable_parameters() const;

  // Checkpoint: "RGPK" magic, u32 version, u64 count, then for each
  // parameter in name order: u32 name length, name bytes, u32 rank,
  // i64 dims, raw little-endian f64 data.
  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

  // Deep copy of values only (for best-checkpoint snapshots).
  std::map<std::string, std::vector<double>> snapshot_values() const;
  void restore_values(const std::map<std::string, std::vector<double>>& snap);

  uint64_t init_seed() const { return init_seed_; }

 private:
  struct Entry {
    Value value;
    std::vector<double> m1, m2;
  };
  std::map<std::string, Entry> params_;
  uint64_t init_seed_ = 0;
  uint64_t version_ = 0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  int64_t worst_index = -1;
  size_t coords_checked = 0;
};

// Central finite differences against analytic gradients of f (a deterministic
// scalar function of the store). Coordinates are subsampled per parameter with
// a seeded stream. Frozen parameters are skipped.
GradCheckReport check_gradients(const std::function<Value(ParameterStore&)>& f,
                                ParameterStore& store, double h = 1e-5,
                                size_t max_coords_per_param = 16, uint64_t seed = 1234);

}  // namespace relgp
