#include "relgp/common.hpp"

#include <charconv>
#include <cmath>

namespace relgp {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::DuplicatePrimaryKey: return "DuplicatePrimaryKey";
    case ErrorKind::UnknownRelation: return "UnknownRelation";
    case ErrorKind::UnknownNode: return "UnknownNode";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonScalarLoss: return "NonScalarLoss";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::UnfittedEncoder: return "UnfittedEncoder";
    case ErrorKind::MissingEmbedding: return "MissingEmbedding";
    case ErrorKind::UnknownTask: return "UnknownTask";
    case ErrorKind::InsufficientExamples: return "InsufficientExamples";
    case ErrorKind::ContextOverflow: return "ContextOverflow";
    case ErrorKind::EmptyMaskSet: return "EmptyMaskSet";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::DegenerateLabels: return "DegenerateLabels";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::UnknownSplit: return "UnknownSplit";
    case ErrorKind::UnsupportedMode: return "UnsupportedMode";
    case ErrorKind::UsageError: return "UsageError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Error";
}

double Rng::normal() {
  // u1 in (0,1] to keep log finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

uint64_t mix_key(std::initializer_list<uint64_t> parts) {
  uint64_t h = 0x243f6a8885a308d3ull;  // arbitrary odd constant
  for (uint64_t p : parts) {
    h ^= p + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
  }
  return h;
}

std::string format_double(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::fabs(v) < 1e15) {
    // Integral values print without a trailing ".0" so they tokenize atomically.
    return std::to_string(static_cast<long long>(v));
  }
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace relgp
