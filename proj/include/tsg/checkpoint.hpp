#pragma once

#include <filesystem>
#include <string>

#include "tsg/params.hpp"

namespace tsg {

/// Binary layout: "TSGCKPT1", then per parameter
///   u64 name length, name bytes, u64 rank, rank x u64 dims, f32 values
/// all little-endian, row-major, until end of file.
/// Double-precision models are rounded to f32 on save.
class CheckpointError : public Error {
 public:
  enum class Kind { Io, BadMagic, Truncated, UnknownParameter, MissingParameter, ShapeMismatch, Duplicate };
  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

void save_checkpoint(const ParamStore& store, const std::filesystem::path& path);
/// Either every parameter is assigned or, on any error, none is.
void load_checkpoint(ParamStore& store, const std::filesystem::path& path);

}  // namespace tsg
