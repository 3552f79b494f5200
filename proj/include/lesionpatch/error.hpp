#pragma once

#include <stdexcept>
#include <string>

namespace lesionpatch {

// Base of every error raised by the library. The category drives the CLI
// exit code: validation problems (bad input data or arguments), I/O failures,
// and internal invariant violations.
class Error : public std::runtime_error {
 public:
  enum class Category { kValidation, kIo, kInternal };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(Category::kValidation, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(Category::kIo, what) {}
};

class InvariantViolation : public Error {
 public:
  explicit InvariantViolation(const std::string& what)
      : Error(Category::kInternal, what) {}
};

// imaging-core
class EmptyMask : public ValidationError {
 public:
  EmptyMask() : ValidationError("mask has no bit set") {}
};

class OutOfBounds : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InvalidSide : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// memd-scoring
class EmptyImage : public ValidationError {
 public:
  EmptyImage() : ValidationError("image has no pixels") {}
};

class MixedPatchSizes : public ValidationError {
 public:
  MixedPatchSizes() : ValidationError("patches of one image differ in size") {}
};

// selection
class DuplicateImageId : public ValidationError {
 public:
  explicit DuplicateImageId(const std::string& id)
      : ValidationError("duplicate image id: " + id) {}
};

class InsufficientBenign : public ValidationError {
 public:
  InsufficientBenign(std::size_t benign, std::size_t malignant)
      : ValidationError("benign pool (" + std::to_string(benign) +
                        ") smaller than malignant count (" +
                        std::to_string(malignant) + ")") {}
};

// aggregation
class EmptyPredictions : public ValidationError {
 public:
  explicit EmptyPredictions(const std::string& image_id)
      : ValidationError("no predictions for image " + image_id) {}
};

class MissingPrediction : public ValidationError {
 public:
  explicit MissingPrediction(const std::string& patch_id)
      : ValidationError("missing prediction for patch " + patch_id) {}
};

class UnknownPatch : public ValidationError {
 public:
  explicit UnknownPatch(const std::string& patch_id)
      : ValidationError("prediction for unknown patch " + patch_id) {}
};

// ingestion
class MissingIndexFile : public IoError {
 public:
  explicit MissingIndexFile(const std::string& path)
      : IoError("index file not found: " + path) {}
};

class MalformedRow : public ValidationError {
 public:
  MalformedRow(std::size_t line, const std::string& detail)
      : ValidationError("malformed row at line " + std::to_string(line) + ": " +
                        detail),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class MissingFile : public IoError {
 public:
  explicit MissingFile(const std::string& path)
      : IoError("missing file: " + path), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class UnknownLabel : public ValidationError {
 public:
  UnknownLabel(std::size_t line, const std::string& value)
      : ValidationError("unknown label '" + value + "' at line " +
                        std::to_string(line)),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class NetworkError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace lesionpatch
