#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lesionpatch/image.hpp"
#include "lesionpatch/selection.hpp"

namespace lesionpatch {

// End-to-end preprocessing over a patch store directory.
//
// Store layout (coordinates only, crops are recut from the source images):
//   store.json             dataset root, sides, coverage threshold
//   images.csv             image_id,image_path,label,width,height
//   patches.csv            image_id,side,origin_x,origin_y
//   counts.json            per-side patch counts and skipped images
//   scores_<criterion>.csv image_id,side,origin_x,origin_y,score
//   histogram_<criterion>.json
// Every table is sorted by image_id, side, then row-major origin.

struct StoreImage {
  std::string image_id;
  std::filesystem::path image_path;  // resolved
  Label label = Label::kBenign;
  Eigen::Index width = 0;
  Eigen::Index height = 0;
};

struct StorePatch {
  std::string image_id;
  int side = 0;
  Origin origin;
};

struct PatchStore {
  std::filesystem::path dir;
  std::filesystem::path dataset_root;
  std::vector<int> sides;
  double coverage_threshold = 0.5;
  std::vector<StoreImage> images;
  std::vector<StorePatch> patches;
};

PatchStore load_store(const std::filesystem::path& dir);

struct ExtractOptions {
  std::filesystem::path dataset_root;
  std::vector<int> sides{32, 64, 128, 256};
  double coverage_threshold = 0.5;
  std::filesystem::path out;
  unsigned threads = 1;
};

struct SideCount {
  std::size_t patches = 0;
  std::size_t images = 0;
  std::vector<std::string> skipped;  // usable images with no patch at this side
};

struct ExtractReport {
  std::map<int, SideCount> sides;
  std::map<std::string, std::string> unusable;  // image_id -> reason
};

ExtractReport run_extract(const ExtractOptions& options);

struct ScoreOptions {
  std::filesystem::path store;
  Criterion criterion = Criterion::kEntropy;
  unsigned threads = 1;
};

/// Binned score distribution of one criterion at one patch side. Bins are
/// 1.0 wide over [0, 255] for MEMD and 0.05 wide over [0, 8] for entropy; the
/// top edge falls into the last bin.
struct HistogramExport {
  Criterion criterion = Criterion::kEntropy;
  int side = 0;
  std::vector<double> bin_edges;
  std::vector<std::uint64_t> counts;
};

HistogramExport make_histogram(Criterion criterion, int side,
                               const std::vector<double>& scores);

struct ScoredPatch {
  StorePatch patch;
  double score = 0.0;
};

struct ScoreReport {
  std::vector<ScoredPatch> scores;
  std::vector<HistogramExport> histograms;
};

ScoreReport run_score(const ScoreOptions& options);

/// Reads scores_<criterion>.csv of a store; scores keep their six-decimal
/// persisted value.
std::vector<ScoredPatch> load_scores(const std::filesystem::path& store,
                                     Criterion criterion);

struct SelectOptions {
  std::filesystem::path store;
  SelectionSpec spec;
  std::uint64_t seed = 0;
  std::vector<int> sides;  // empty: every side of the store
  std::filesystem::path out;
  bool balance = true;
};

struct ManifestHeader {
  Criterion criterion = Criterion::kEntropy;
  Band band = Band::kLow;
  double quantile = 0.15;
  int side = 0;
  std::uint64_t seed = 0;
  std::string tool_version;
};

struct DatasetManifest {
  ManifestHeader header;
  std::vector<PatchRecord> rows;
};

std::string manifest_file_name(const ManifestHeader& header);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Writes one manifest per side into options.out and returns their paths.
std::vector<std::filesystem::path> run_select(const SelectOptions& options);

struct AggregateOptions {
  std::filesystem::path predictions;
  std::filesystem::path manifest;
  std::filesystem::path out;
};

struct AccuracyReport {
  std::size_t test_images = 0;
  std::size_t correct = 0;
  double accuracy_percent = 0.0;  // rounded to 0.1
};

AccuracyReport run_aggregate(const AggregateOptions& options);

struct BenchOptions {
  std::filesystem::path store;
  Criterion criterion = Criterion::kMemd;
  int repetitions = 3;
  unsigned threads = 1;
};

/// JSON timing report with per-image wall-time samples, their median, pair
/// counts and pairs per second.
std::string run_bench(const BenchOptions& options);

}  // namespace lesionpatch
