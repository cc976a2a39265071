#ifndef BSQ_ERROR_HPP
#define BSQ_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace bsq {

// Every failure the library reports is a bsq::Error tagged with one of these.
enum class ErrorKind {
  ZeroNorm,
  Unsupported,
  OutOfRange,
  EmptyCodebook,
  TooLarge,
  EmptyBatch,
  BadGroupSize,
  NonFinite,
  ShapeMismatch,
  Diverged,
  UnknownKind,
  UncodableSymbol,
  CorruptStream,
  BadMagic,
  VersionMismatch,
  BadDimensions,
  BadCheckpoint,
  GeometryMismatch,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ZeroNorm: return "ZeroNorm";
    case ErrorKind::Unsupported: return "Unsupported";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::EmptyCodebook: return "EmptyCodebook";
    case ErrorKind::TooLarge: return "TooLarge";
    case ErrorKind::EmptyBatch: return "EmptyBatch";
    case ErrorKind::BadGroupSize: return "BadGroupSize";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::UnknownKind: return "UnknownKind";
    case ErrorKind::UncodableSymbol: return "UncodableSymbol";
    case ErrorKind::CorruptStream: return "CorruptStream";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::BadDimensions: return "BadDimensions";
    case ErrorKind::BadCheckpoint: return "BadCheckpoint";
    case ErrorKind::GeometryMismatch: return "GeometryMismatch";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace bsq

#endif  // BSQ_ERROR_HPP
