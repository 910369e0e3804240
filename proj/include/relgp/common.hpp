#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace relgp {

// Failure modes surfaced by the public API. Tests match on the kind, not the
// message text.
enum class ErrorKind {
  MissingFile,
  SchemaMismatch,
  DuplicatePrimaryKey,
  UnknownRelation,
  UnknownNode,
  ShapeMismatch,
  NonScalarLoss,
  NonFiniteLoss,
  UnfittedEncoder,
  MissingEmbedding,
  UnknownTask,
  InsufficientExamples,
  ContextOverflow,
  EmptyMaskSet,
  DomainError,
  DegenerateLabels,
  LengthMismatch,
  ConfigError,
  UnknownSplit,
  UnsupportedMode,
  UsageError,
  IoError,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + msg),
        kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

// ---------------------------------------------------------------------------
// Time. Integer epoch seconds; NEG_INF orders below every finite timestamp
// and marks non-temporal rows.
// ---------------------------------------------------------------------------

using Timestamp = int64_t;
constexpr Timestamp kNegInfTime = std::numeric_limits<int64_t>::min();
constexpr Timestamp kMaxTime = std::numeric_limits<int64_t>::max();

// ---------------------------------------------------------------------------
// Node ids. (table ordinal, row ordinal) packed into one 64-bit id so ids are
// stable across runs and cheap to order.
// ---------------------------------------------------------------------------

using NodeId = uint64_t;

constexpr NodeId pack_node(uint32_t table, uint32_t row) {
  return (static_cast<uint64_t>(table) << 32) | row;
}
constexpr uint32_t node_table(NodeId id) { return static_cast<uint32_t>(id >> 32); }
constexpr uint32_t node_row(NodeId id) { return static_cast<uint32_t>(id & 0xffffffffu); }

// ---------------------------------------------------------------------------
// Deterministic RNG. splitmix64 core with hand-rolled distributions so every
// draw is identical across platforms and standard library versions.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Unbiased draw in [0, n) via rejection.
  uint64_t below(uint64_t n) {
    if (n == 0) raise(ErrorKind::DomainError, "Rng::below(0)");
    uint64_t threshold = (-n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive integer range.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1)));
  }

  // Box-Muller, no cached spare so call count maps 1:1 onto the stream.
  double normal();

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

// Key-derived stream: hashing the key parts gives reproducible substreams
// regardless of evaluation order or scheduling.
uint64_t mix_key(std::initializer_list<uint64_t> parts);

inline Rng keyed_rng(std::initializer_list<uint64_t> parts) {
  return Rng(mix_key(parts));
}

// Canonical float formatting (shortest round-trip) shared by CSV output,
// JSON documents and token rendering.
std::string format_double(double v);

}  // namespace relgp
