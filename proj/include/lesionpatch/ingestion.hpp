#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lesionpatch/image.hpp"

namespace lesionpatch {

inline constexpr const char* kIndexFileName = "index.csv";
inline constexpr const char* kIndexHeader = "image_id,image_path,mask_path,label";

struct IndexRecord {
  std::string image_id;
  std::filesystem::path image_path;  // as written in the index, relative to root
  std::optional<std::filesystem::path> mask_path;
  Label label = Label::kBenign;

  friend bool operator==(const IndexRecord&, const IndexRecord&) = default;
};

/// Images, masks and labels of a local dataset directory.
struct DatasetIndex {
  std::filesystem::path root;
  std::vector<IndexRecord> records;

  std::filesystem::path resolve(const std::filesystem::path& p) const {
    return p.is_absolute() ? p : root / p;
  }
  friend bool operator==(const DatasetIndex&, const DatasetIndex&) = default;
};

/// Reads and validates `root/index.csv`. Rows without a mask are kept.
/// Throws MissingIndexFile, MalformedRow, MissingFile, UnknownLabel.
DatasetIndex load_index(const std::filesystem::path& root);

/// Writes `index.root/index.csv`.
void write_index(const DatasetIndex& index);

struct FetchOptions {
  std::string endpoint;  // http://host[:port][/prefix]
  unsigned concurrency = 4;
};

struct FetchStatus {
  enum class Kind { kDownloaded, kAlreadyPresent, kNotFound, kFailed };
  std::string image_id;
  Kind kind = Kind::kFailed;
  std::string detail;
};

struct FetchReport {
  DatasetIndex index;
  std::vector<FetchStatus> statuses;  // one per requested id, in request order
  std::size_t requests = 0;           // HTTP GET requests issued
};

/// Environment variable consulted for the archive endpoint when none is given.
inline constexpr const char* kEndpointEnv = "LESIONPATCH_ENDPOINT";

/// Downloads image, mask and label of every id from a stub-compatible archive
/// (`GET {endpoint}/images/{id}`, `/masks/{id}`, `/labels/{id}`) into `dest`,
/// writes the index and returns it reloaded. Files already present with the
/// advertised size are not fetched again. Failures are reported per id; a
/// missing mask is not a failure. Throws NetworkError only for an unusable
/// endpoint.
FetchReport fetch_remote(const std::vector<std::string>& image_ids,
                         const FetchOptions& options,
                         const std::filesystem::path& dest);

}  // namespace lesionpatch
