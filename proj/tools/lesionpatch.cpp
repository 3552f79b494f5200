// lesionpatch: patch extraction, scoring, selection and vote aggregation for
// lesion image datasets.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include "lesionpatch/error.hpp"
#include "lesionpatch/ingestion.hpp"
#include "lesionpatch/pipeline.hpp"
#include "lesionpatch/version.hpp"

namespace {

namespace fs = std::filesystem;
using namespace lesionpatch;

enum ExitCode { kOk = 0, kValidation = 1, kIo = 2, kInternal = 3 };

struct GlobalFlags {
  std::uint64_t seed = 0;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  std::string out;
  double coverage_threshold = 0.5;
  double quantile = 0.15;
  std::string criterion = "entropy";
  std::string band = "low";
  std::vector<int> sides;
};

const CLI::Validator kOpenQuantile(
    [](std::string& text) -> std::string {
      double q = 0;
      try {
        q = std::stod(text);
      } catch (const std::exception&) {
        return "quantile must be a number";
      }
      return q > 0.0 && q < 0.5 ? "" : "quantile must lie in (0, 0.5)";
    },
    "(0,0.5)");

std::vector<std::string> read_ids_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile(path.string());
  std::vector<std::string> ids;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

fs::path require_out(const GlobalFlags& g, const char* what) {
  if (g.out.empty()) throw ValidationError(std::string("--out is required for ") + what);
  return g.out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Patch extraction and patch scoring for lesion image datasets"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  app.add_option("--seed", g.seed, "Seed for class balancing and split assignment")
      ->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--out", g.out,
                 "Output: store directory (extract), manifest directory (select), report "
                 "directory (aggregate), JSON file (bench), dataset directory (fetch)");
  app.add_option("--coverage-threshold", g.coverage_threshold,
                 "Minimum fraction of a grid cell covered by the mask")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app.add_option("--quantile", g.quantile, "Band quantile q; low keeps <= q, high keeps >= 1-q")
      ->check(kOpenQuantile)
      ->capture_default_str();
  app.add_option("--criterion", g.criterion, "Scoring criterion")
      ->check(CLI::IsMember({"entropy", "memd"}))
      ->capture_default_str();
  app.add_option("--band", g.band, "Selection band")
      ->check(CLI::IsMember({"low", "high"}))
      ->capture_default_str();
  app.add_option("--sides", g.sides, "Patch sides, comma separated (32,64,128,256)")
      ->delimiter(',');

  std::string dataset_root;
  auto* extract = app.add_subcommand("extract", "Tile every mask ROI into square patches");
  extract->add_option("--index", dataset_root, "Dataset directory holding index.csv")->required();

  std::string store_dir;
  auto* score = app.add_subcommand("score", "Score every stored patch with one criterion");
  score->add_option("--store", store_dir, "Patch store directory")->required();

  bool no_balance = false;
  auto* select = app.add_subcommand("select", "Write quantile-band dataset manifests");
  select->add_option("--store", store_dir, "Patch store directory")->required();
  select->add_flag("--no-balance", no_balance, "Keep every scored image instead of balancing classes");

  std::string predictions;
  std::string manifest;
  auto* aggregate = app.add_subcommand("aggregate", "Vote patch predictions into image verdicts");
  aggregate->add_option("--predictions", predictions, "CSV with patch_id,prediction")->required();
  aggregate->add_option("--manifest", manifest, "Manifest the predictions refer to")->required();

  int repetitions = 3;
  auto* bench = app.add_subcommand("bench", "Time per-image scoring");
  bench->add_option("--store", store_dir, "Patch store directory")->required();
  bench->add_option("--repetitions", repetitions, "Timing samples per image")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  std::vector<std::string> ids;
  std::string ids_file;
  std::string endpoint;
  unsigned concurrency = 4;
  auto* fetch = app.add_subcommand("fetch", "Download images, masks and labels from an archive");
  fetch->add_option("--ids", ids, "Image ids, comma separated")->delimiter(',');
  fetch->add_option("--ids-file", ids_file, "File with one image id per line");
  fetch->add_option("--endpoint", endpoint,
                    std::string("Archive base URL (default: $") + kEndpointEnv + ")");
  fetch->add_option("--concurrency", concurrency, "Parallel downloads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    const Criterion criterion = *parse_criterion(g.criterion);
    if (*extract) {
      ExtractOptions opts;
      opts.dataset_root = dataset_root;
      if (!g.sides.empty()) opts.sides = g.sides;
      opts.coverage_threshold = g.coverage_threshold;
      opts.out = require_out(g, "extract");
      opts.threads = g.threads;
      const ExtractReport report = run_extract(opts);
      std::cout << "side\tpatches\timages\tskipped\n";
      for (const auto& [side, c] : report.sides) {
        std::cout << side << '\t' << c.patches << '\t' << c.images << '\t' << c.skipped.size()
                  << '\n';
      }
      for (const auto& [id, reason] : report.unusable) {
        std::cout << "unusable\t" << id << '\t' << reason << '\n';
      }
    } else if (*score) {
      const ScoreReport report = run_score({store_dir, criterion, g.threads});
      std::cout << "scored " << report.scores.size() << " patches by " << g.criterion << '\n';
    } else if (*select) {
      SelectOptions opts;
      opts.store = store_dir;
      opts.spec = SelectionSpec::make(criterion, *parse_band(g.band), g.quantile);
      opts.seed = g.seed;
      opts.sides = g.sides;
      opts.out = require_out(g, "select");
      opts.balance = !no_balance;
      for (const auto& path : run_select(opts)) std::cout << path.string() << '\n';
    } else if (*aggregate) {
      const AccuracyReport report =
          run_aggregate({predictions, manifest, require_out(g, "aggregate")});
      std::printf("accuracy: %.1f%% (%zu/%zu test images)\n", report.accuracy_percent,
                  report.correct, report.test_images);
    } else if (*bench) {
      const std::string json =
          run_bench({store_dir, app.count("--criterion") ? criterion : Criterion::kMemd,
                     repetitions, g.threads});
      if (g.out.empty()) {
        std::cout << json << '\n';
      } else {
        std::ofstream out(g.out);
        out << json << '\n';
        if (!out) throw IoError("cannot write " + g.out);
      }
    } else if (*fetch) {
      if (!ids_file.empty()) {
        const auto more = read_ids_file(ids_file);
        ids.insert(ids.end(), more.begin(), more.end());
      }
      const FetchReport report =
          fetch_remote(ids, {endpoint, concurrency}, require_out(g, "fetch"));
      bool any_failed = false;
      for (const auto& s : report.statuses) {
        const char* kind = "";
        switch (s.kind) {
          case FetchStatus::Kind::kDownloaded: kind = "downloaded"; break;
          case FetchStatus::Kind::kAlreadyPresent: kind = "present"; break;
          case FetchStatus::Kind::kNotFound: kind = "not-found"; any_failed = true; break;
          case FetchStatus::Kind::kFailed: kind = "failed"; any_failed = true; break;
        }
        std::cout << s.image_id << '\t' << kind;
        if (!s.detail.empty()) std::cout << '\t' << s.detail;
        std::cout << '\n';
      }
      if (any_failed) return kIo;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.category()) {
      case Error::Category::kValidation: return kValidation;
      case Error::Category::kIo: return kIo;
      case Error::Category::kInternal: return kInternal;
    }
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kOk;
}
