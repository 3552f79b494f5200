#include "lesionpatch/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <tuple>

#include "lesionpatch/aggregation.hpp"
#include "lesionpatch/csv.hpp"
#include "lesionpatch/entropy.hpp"
#include "lesionpatch/ingestion.hpp"
#include "lesionpatch/memd.hpp"
#include "lesionpatch/parallel.hpp"
#include "lesionpatch/png_io.hpp"
#include "lesionpatch/version.hpp"

namespace lesionpatch {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kStoreFile = "store.json";
constexpr const char* kImagesFile = "images.csv";
constexpr const char* kPatchesFile = "patches.csv";
constexpr const char* kCountsFile = "counts.json";
constexpr const char* kImagesHeader = "image_id,image_path,label,width,height";
constexpr const char* kPatchesHeader = "image_id,side,origin_x,origin_y";
constexpr const char* kScoresHeader = "image_id,side,origin_x,origin_y,score";
constexpr const char* kManifestHeader =
    "patch_id,image_id,origin_x,origin_y,side,label,entropy,memd_mean,split";
constexpr const char* kPredictionsHeader = "patch_id,prediction";

auto patch_key(const StorePatch& p) {
  return std::tie(p.image_id, p.side, p.origin.y, p.origin.x);
}

std::string scores_file(Criterion c) {
  return "scores_" + std::string(to_string(c)) + ".csv";
}

std::string histogram_file(Criterion c) {
  return "histogram_" + std::string(to_string(c)) + ".json";
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

// Rows of a headed CSV file; header must match exactly.
std::vector<std::vector<std::string>> read_table(const fs::path& path,
                                                 std::string_view header,
                                                 std::size_t fields) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile(path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != header) {
        throw MalformedRow(1, path.string() + ": expected header '" + std::string(header) + "'");
      }
      continue;
    }
    if (line.empty()) continue;
    auto row = csv::split(line);
    if (row.size() != fields) {
      throw MalformedRow(line_no, path.string() + ": expected " + std::to_string(fields) + " fields");
    }
    rows.push_back(std::move(row));
  }
  if (line_no == 0) throw MalformedRow(1, path.string() + ": empty file");
  return rows;
}

template <typename T>
T number_or_throw(const std::string& text, std::size_t row, const fs::path& path) {
  const auto v = csv::parse_number<T>(text);
  if (!v) throw MalformedRow(row + 2, path.string() + ": bad number '" + text + "'");
  return *v;
}

std::vector<int> normalized_sides(std::vector<int> sides) {
  if (sides.empty()) throw ValidationError("no patch side requested");
  for (int s : sides) {
    if (!is_patch_side(s)) {
      throw InvalidSide("patch side " + std::to_string(s) + " is not one of 32, 64, 128, 256");
    }
  }
  std::sort(sides.begin(), sides.end());
  sides.erase(std::unique(sides.begin(), sides.end()), sides.end());
  return sides;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Contiguous runs of store patches sharing image and side.
struct PatchGroup {
  std::size_t image = 0;  // index into PatchStore::images
  int side = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
};

std::vector<std::vector<PatchGroup>> group_by_image(const PatchStore& store) {
  std::map<std::string, std::size_t> image_pos;
  for (std::size_t i = 0; i < store.images.size(); ++i) {
    image_pos.emplace(store.images[i].image_id, i);
  }
  std::vector<std::vector<PatchGroup>> groups(store.images.size());
  for (std::size_t k = 0; k < store.patches.size();) {
    const auto& p = store.patches[k];
    const auto it = image_pos.find(p.image_id);
    if (it == image_pos.end()) {
      throw InvariantViolation("patch references unknown image " + p.image_id);
    }
    std::size_t end = k;
    while (end < store.patches.size() && store.patches[end].image_id == p.image_id &&
           store.patches[end].side == p.side) {
      ++end;
    }
    groups[it->second].push_back({it->second, p.side, k, end});
    k = end;
  }
  return groups;
}

std::vector<PixelMultiset> crop_multisets(const GrayImage& gray, const PatchStore& store,
                                          const PatchGroup& g) {
  std::vector<PixelMultiset> out;
  out.reserve(g.end - g.begin);
  for (std::size_t k = g.begin; k < g.end; ++k) {
    const auto& p = store.patches[k];
    out.push_back(PixelMultiset::from(crop(gray, p.origin, p.side)));
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- store

PatchStore load_store(const fs::path& dir) {
  PatchStore store;
  store.dir = dir;
  {
    std::ifstream in(dir / kStoreFile);
    if (!in) throw MissingFile((dir / kStoreFile).string());
    json meta;
    try {
      in >> meta;
      store.dataset_root = meta.at("dataset_root").get<std::string>();
      store.sides = meta.at("sides").get<std::vector<int>>();
      store.coverage_threshold = meta.at("coverage_threshold").get<double>();
    } catch (const json::exception& e) {
      throw ValidationError((dir / kStoreFile).string() + ": " + e.what());
    }
  }
  const fs::path images_path = dir / kImagesFile;
  const auto image_rows = read_table(images_path, kImagesHeader, 5);
  for (std::size_t r = 0; r < image_rows.size(); ++r) {
    const auto& row = image_rows[r];
    const auto label = parse_label(row[2]);
    if (!label) throw UnknownLabel(r + 2, row[2]);
    store.images.push_back({row[0], fs::path(row[1]), *label,
                            number_or_throw<Eigen::Index>(row[3], r, images_path),
                            number_or_throw<Eigen::Index>(row[4], r, images_path)});
  }
  const fs::path patches_path = dir / kPatchesFile;
  const auto patch_rows = read_table(patches_path, kPatchesHeader, 4);
  store.patches.reserve(patch_rows.size());
  for (std::size_t r = 0; r < patch_rows.size(); ++r) {
    const auto& row = patch_rows[r];
    store.patches.push_back({row[0], number_or_throw<int>(row[1], r, patches_path),
                             {number_or_throw<int>(row[2], r, patches_path),
                              number_or_throw<int>(row[3], r, patches_path)}});
  }
  if (!std::is_sorted(store.patches.begin(), store.patches.end(),
                      [](const StorePatch& a, const StorePatch& b) {
                        return patch_key(a) < patch_key(b);
                      })) {
    throw InvariantViolation(patches_path.string() + " is not in canonical order");
  }
  return store;
}

// ---------------------------------------------------------------- extract

ExtractReport run_extract(const ExtractOptions& options) {
  const std::vector<int> sides = normalized_sides(options.sides);
  if (!(options.coverage_threshold >= 0.0 && options.coverage_threshold <= 1.0)) {
    throw ValidationError("coverage threshold must lie in [0, 1]");
  }
  const DatasetIndex index = load_index(options.dataset_root);

  struct ImageResult {
    std::optional<StoreImage> image;
    std::string unusable;
    std::map<int, std::vector<Origin>> origins;
  };
  std::vector<ImageResult> results(index.records.size());
  parallel_for(index.records.size(), options.threads, [&](std::size_t i, unsigned) {
    const IndexRecord& rec = index.records[i];
    ImageResult& res = results[i];
    if (!rec.mask_path) {
      res.unusable = "no mask";
      return;
    }
    const fs::path image_path = fs::absolute(index.resolve(rec.image_path));
    const auto [width, height] = png_dimensions(image_path);
    const Mask mask = read_png_mask(index.resolve(*rec.mask_path));
    if (mask.cols() != width || mask.rows() != height) {
      throw ValidationError("mask of " + rec.image_id + " is " + std::to_string(mask.cols()) +
                            "x" + std::to_string(mask.rows()) + ", image is " +
                            std::to_string(width) + "x" + std::to_string(height));
    }
    try {
      for (int side : sides) {
        res.origins[side] = tile_roi(width, height, mask, side, options.coverage_threshold);
      }
    } catch (const EmptyMask&) {
      res.unusable = "empty mask";
      res.origins.clear();
      return;
    }
    res.image = StoreImage{rec.image_id, image_path, rec.label, width, height};
  });

  // Single collector: canonical order by image id.
  std::vector<std::size_t> order(results.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return index.records[a].image_id < index.records[b].image_id;
  });

  ExtractReport report;
  for (int side : sides) report.sides[side];
  fs::create_directories(options.out);
  const fs::path images_path = options.out / kImagesFile;
  const fs::path patches_path = options.out / kPatchesFile;
  auto images_out = open_out(images_path);
  auto patches_out = open_out(patches_path);
  images_out << kImagesHeader << '\n';
  patches_out << kPatchesHeader << '\n';
  for (std::size_t i : order) {
    const auto& res = results[i];
    const std::string& id = index.records[i].image_id;
    if (!res.image) {
      report.unusable[id] = res.unusable;
      std::clog << "skipping image " << id << ": " << res.unusable << '\n';
      continue;
    }
    if (!csv::is_plain_field(id) || !csv::is_plain_field(res.image->image_path.string())) {
      throw ValidationError("image id or path of '" + id + "' contains a separator");
    }
    images_out << id << ',' << res.image->image_path.generic_string() << ','
               << to_string(res.image->label) << ',' << res.image->width << ','
               << res.image->height << '\n';
    for (const auto& [side, origins] : res.origins) {
      SideCount& count = report.sides[side];
      if (origins.empty()) {
        count.skipped.push_back(id);
        std::clog << "image " << id << " yields no " << side << "px patch\n";
        continue;
      }
      ++count.images;
      count.patches += origins.size();
      for (const Origin& o : origins) {
        patches_out << id << ',' << side << ',' << o.x << ',' << o.y << '\n';
      }
    }
  }
  finish(images_out, images_path);
  finish(patches_out, patches_path);

  json counts;
  counts["sides"] = json::array();
  for (const auto& [side, c] : report.sides) {
    counts["sides"].push_back(
        {{"side", side}, {"patches", c.patches}, {"images", c.images}, {"skipped", c.skipped}});
  }
  counts["unusable"] = json::array();
  for (const auto& [id, reason] : report.unusable) {
    counts["unusable"].push_back({{"image_id", id}, {"reason", reason}});
  }
  auto counts_out = open_out(options.out / kCountsFile);
  counts_out << counts.dump(2) << '\n';
  finish(counts_out, options.out / kCountsFile);

  json meta{{"format", "lesionpatch-store"},
            {"tool_version", kToolVersion},
            {"dataset_root", fs::absolute(options.dataset_root).generic_string()},
            {"sides", sides},
            {"coverage_threshold", options.coverage_threshold}};
  auto meta_out = open_out(options.out / kStoreFile);
  meta_out << meta.dump(2) << '\n';
  finish(meta_out, options.out / kStoreFile);
  return report;
}

// ---------------------------------------------------------------- score

HistogramExport make_histogram(Criterion criterion, int side,
                               const std::vector<double>& scores) {
  const std::int64_t bins_per_unit = criterion == Criterion::kMemd ? 1 : 20;
  const std::int64_t upper = criterion == Criterion::kMemd ? 255 : 8;
  const std::int64_t bins = upper * bins_per_unit;
  HistogramExport h;
  h.criterion = criterion;
  h.side = side;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (std::int64_t k = 0; k <= bins; ++k) {
    h.bin_edges.push_back(static_cast<double>(k) / static_cast<double>(bins_per_unit));
  }
  for (double s : scores) {
    // Bin on the persisted six-decimal value, in integer micro-units.
    const std::int64_t micro = std::llround(s * 1e6);
    const std::int64_t bin = std::clamp<std::int64_t>(micro * bins_per_unit / 1000000, 0, bins - 1);
    ++h.counts[static_cast<std::size_t>(bin)];
  }
  return h;
}

ScoreReport run_score(const ScoreOptions& options) {
  const PatchStore store = load_store(options.store);
  const auto groups = group_by_image(store);
  const unsigned inner_threads =
      store.images.empty() || store.images.size() >= options.threads
          ? 1u
          : std::max(1u, static_cast<unsigned>(options.threads / store.images.size()));

  std::vector<double> scores(store.patches.size(), 0.0);
  parallel_for(store.images.size(), options.threads, [&](std::size_t i, unsigned) {
    if (groups[i].empty()) return;
    const GrayImage gray = read_png_gray(store.images[i].image_path);
    if (gray.cols() != store.images[i].width || gray.rows() != store.images[i].height) {
      throw ValidationError("image " + store.images[i].image_id + " changed size since extraction");
    }
    for (const PatchGroup& g : groups[i]) {
      if (options.criterion == Criterion::kEntropy) {
        for (std::size_t k = g.begin; k < g.end; ++k) {
          const auto& p = store.patches[k];
          scores[k] = patch_entropy(crop(gray, p.origin, p.side));
        }
      } else {
        const auto multisets = crop_multisets(gray, store, g);
        const auto summary = per_patch_memd(std::span<const PixelMultiset>(multisets),
                                            {inner_threads, nullptr});
        for (std::size_t k = g.begin; k < g.end; ++k) {
          scores[k] = summary[k - g.begin].memd_mean;
        }
      }
    }
  });

  ScoreReport report;
  const fs::path scores_path = options.store / scores_file(options.criterion);
  auto out = open_out(scores_path);
  out << kScoresHeader << '\n';
  std::map<int, std::vector<double>> by_side;
  for (int side : store.sides) by_side[side];
  for (std::size_t k = 0; k < store.patches.size(); ++k) {
    const auto& p = store.patches[k];
    const std::string text = csv::fixed6(scores[k]);
    out << p.image_id << ',' << p.side << ',' << p.origin.x << ',' << p.origin.y << ','
        << text << '\n';
    const double persisted = *csv::parse_number<double>(text);
    by_side[p.side].push_back(persisted);
    report.scores.push_back({p, persisted});
  }
  finish(out, scores_path);

  json hist{{"criterion", to_string(options.criterion)}, {"histograms", json::array()}};
  for (const auto& [side, values] : by_side) {
    HistogramExport h = make_histogram(options.criterion, side, values);
    hist["histograms"].push_back({{"side", side},
                                  {"bin_width", h.bin_edges[1] - h.bin_edges[0]},
                                  {"bin_edges", h.bin_edges},
                                  {"counts", h.counts},
                                  {"total", values.size()}});
    report.histograms.push_back(std::move(h));
  }
  const fs::path hist_path = options.store / histogram_file(options.criterion);
  auto hist_out = open_out(hist_path);
  hist_out << hist.dump(2) << '\n';
  finish(hist_out, hist_path);
  return report;
}

std::vector<ScoredPatch> load_scores(const fs::path& store, Criterion criterion) {
  const fs::path path = store / scores_file(criterion);
  const auto rows = read_table(path, kScoresHeader, 5);
  std::vector<ScoredPatch> out;
  out.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    out.push_back({{row[0], number_or_throw<int>(row[1], r, path),
                    {number_or_throw<int>(row[2], r, path), number_or_throw<int>(row[3], r, path)}},
                   number_or_throw<double>(row[4], r, path)});
  }
  return out;
}

// ---------------------------------------------------------------- manifests

std::string manifest_file_name(const ManifestHeader& h) {
  char q[32];
  std::snprintf(q, sizeof q, "%.3f", h.quantile);
  return "manifest_" + std::string(to_string(h.criterion)) + "_" +
         std::string(to_string(h.band)) + "_q" + q + "_" + std::to_string(h.side) + ".csv";
}

void write_manifest(const fs::path& path, const DatasetManifest& m) {
  auto out = open_out(path);
  out << "# lesionpatch manifest\n"
      << "# criterion=" << to_string(m.header.criterion) << '\n'
      << "# band=" << to_string(m.header.band) << '\n'
      << "# quantile=" << csv::fixed6(m.header.quantile) << '\n'
      << "# side=" << m.header.side << '\n'
      << "# seed=" << m.header.seed << '\n'
      << "# tool_version=" << m.header.tool_version << '\n'
      << kManifestHeader << '\n';
  for (const PatchRecord& r : m.rows) {
    if (r.side != m.header.side) {
      throw InvariantViolation("manifest row " + r.patch_id() + " has the wrong side");
    }
    out << r.patch_id() << ',' << r.image_id << ',' << r.origin.x << ',' << r.origin.y
        << ',' << r.side << ',' << static_cast<int>(r.label) << ','
        << (r.entropy ? csv::fixed6(*r.entropy) : "") << ','
        << (r.memd_mean ? csv::fixed6(*r.memd_mean) : "") << ','
        << (r.split ? to_string(*r.split) : "") << '\n';
  }
  finish(out, path);
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile(path.string());
  DatasetManifest m;
  std::map<std::string, std::string> header;
  std::string line;
  std::size_t line_no = 0;
  bool in_rows = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!in_rows) {
      if (line.rfind("# ", 0) == 0) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) header[line.substr(2, eq - 2)] = line.substr(eq + 1);
        continue;
      }
      if (line != kManifestHeader) throw MalformedRow(line_no, "expected manifest column header");
      in_rows = true;
      continue;
    }
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 9) throw MalformedRow(line_no, "expected 9 manifest fields");
    PatchRecord r;
    r.image_id = f[1];
    const auto x = csv::parse_number<int>(f[2]);
    const auto y = csv::parse_number<int>(f[3]);
    const auto side = csv::parse_number<int>(f[4]);
    const auto label = parse_label(f[5]);
    if (!x || !y || !side) throw MalformedRow(line_no, "bad coordinates");
    if (!label) throw UnknownLabel(line_no, f[5]);
    r.origin = {*x, *y};
    r.side = *side;
    r.label = *label;
    if (!f[6].empty()) r.entropy = csv::parse_number<double>(f[6]);
    if (!f[7].empty()) r.memd_mean = csv::parse_number<double>(f[7]);
    if (!f[8].empty()) {
      r.split = parse_split(f[8]);
      if (!r.split) throw MalformedRow(line_no, "unknown split '" + f[8] + "'");
    }
    if (r.patch_id() != f[0]) throw MalformedRow(line_no, "patch_id does not match its fields");
    m.rows.push_back(std::move(r));
  }
  if (!in_rows) throw MalformedRow(line_no, "manifest has no column header");
  try {
    const auto criterion = parse_criterion(header.at("criterion"));
    const auto band = parse_band(header.at("band"));
    const auto quantile = csv::parse_number<double>(header.at("quantile"));
    const auto side = csv::parse_number<int>(header.at("side"));
    const auto seed = csv::parse_number<std::uint64_t>(header.at("seed"));
    if (!criterion || !band || !quantile || !side || !seed) {
      throw ValidationError(path.string() + ": malformed manifest header");
    }
    m.header = {*criterion, *band, *quantile, *side, *seed, header.at("tool_version")};
  } catch (const std::out_of_range&) {
    throw ValidationError(path.string() + ": incomplete manifest header");
  }
  return m;
}

// ---------------------------------------------------------------- select

std::vector<fs::path> run_select(const SelectOptions& options) {
  const SelectionSpec spec = SelectionSpec::make(options.spec.criterion, options.spec.band,
                                                 options.spec.quantile);
  const PatchStore store = load_store(options.store);
  const std::vector<int> sides =
      options.sides.empty() ? store.sides : normalized_sides(options.sides);

  const auto scores = load_scores(options.store, spec.criterion);
  const Criterion other = spec.criterion == Criterion::kEntropy ? Criterion::kMemd
                                                                 : Criterion::kEntropy;
  std::map<std::tuple<std::string, int, int, int>, double> other_scores;
  if (fs::exists(options.store / scores_file(other))) {
    for (const auto& s : load_scores(options.store, other)) {
      other_scores[{s.patch.image_id, s.patch.side, s.patch.origin.x, s.patch.origin.y}] = s.score;
    }
  }

  std::map<std::string, const StoreImage*> images;
  for (const auto& img : store.images) images.emplace(img.image_id, &img);
  std::set<std::string> scored_ids;
  std::map<std::pair<std::string, int>, std::vector<const ScoredPatch*>> grouped;
  for (const auto& s : scores) {
    if (!images.count(s.patch.image_id)) {
      throw InvariantViolation("score for unknown image " + s.patch.image_id);
    }
    scored_ids.insert(s.patch.image_id);
    grouped[{s.patch.image_id, s.patch.side}].push_back(&s);
  }

  std::vector<std::string> selected_ids;
  if (options.balance) {
    std::vector<ImageCandidate> candidates;
    for (const auto& id : scored_ids) candidates.push_back({id, images[id]->label, true});
    selected_ids = balance_classes(candidates, options.seed);
  } else {
    selected_ids.assign(scored_ids.begin(), scored_ids.end());
  }
  const SplitAssignment splits = assign_splits(selected_ids, options.seed);

  std::vector<fs::path> written;
  for (int side : sides) {
    DatasetManifest manifest;
    manifest.header = {spec.criterion, spec.band, spec.quantile, side, options.seed, kToolVersion};
    for (const std::string& id : selected_ids) {
      const auto group = grouped.find({id, side});
      if (group == grouped.end()) continue;
      const std::vector<const ScoredPatch*>& patches = group->second;
      ScoreTable table{id, spec.criterion, {}};
      for (std::size_t k = 0; k < patches.size(); ++k) {
        table.entries.push_back({k, patches[k]->score});
      }
      for (std::size_t idx : select_band(table, spec)) {
        const ScoredPatch& s = *patches[idx];
        PatchRecord r;
        r.image_id = id;
        r.origin = s.patch.origin;
        r.side = side;
        r.label = images[id]->label;
        (spec.criterion == Criterion::kEntropy ? r.entropy : r.memd_mean) = s.score;
        const auto o = other_scores.find({id, side, s.patch.origin.x, s.patch.origin.y});
        if (o != other_scores.end()) {
          (other == Criterion::kEntropy ? r.entropy : r.memd_mean) = o->second;
        }
        r.split = splits.splits.at(id);
        check_patch_record(r, images[id]->width, images[id]->height);
        manifest.rows.push_back(std::move(r));
      }
    }
    const fs::path path = options.out / manifest_file_name(manifest.header);
    write_manifest(path, manifest);
    written.push_back(path);
  }
  return written;
}

// ---------------------------------------------------------------- aggregate

AccuracyReport run_aggregate(const AggregateOptions& options) {
  const DatasetManifest manifest = read_manifest(options.manifest);
  std::map<std::string, const PatchRecord*> by_patch;
  for (const auto& r : manifest.rows) by_patch.emplace(r.patch_id(), &r);

  std::map<std::string, std::uint8_t> predictions;
  const auto rows = read_table(options.predictions, kPredictionsHeader, 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (!by_patch.count(row[0])) throw UnknownPatch(row[0]);
    const auto v = csv::parse_number<int>(row[1]);
    if (!v || (*v != 0 && *v != 1)) {
      throw MalformedRow(i + 2, "prediction must be 0 or 1, got '" + row[1] + "'");
    }
    if (!predictions.emplace(row[0], static_cast<std::uint8_t>(*v)).second) {
      throw MalformedRow(i + 2, "duplicate prediction for " + row[0]);
    }
  }

  std::map<std::string, PatchPredictions> per_image;
  std::map<std::string, Label> truth;
  for (const auto& r : manifest.rows) {
    if (r.split != Split::kTest) continue;
    const auto p = predictions.find(r.patch_id());
    if (p == predictions.end()) throw MissingPrediction(r.patch_id());
    auto& entry = per_image[r.image_id];
    entry.image_id = r.image_id;
    entry.preds.push_back(p->second);
    truth[r.image_id] = r.label;
  }
  if (per_image.empty()) throw ValidationError("manifest has no test-split patches");

  AccuracyReport report;
  const fs::path verdicts_path = options.out / "verdicts.csv";
  auto out = open_out(verdicts_path);
  out << "image_id,patches,mean_score,verdict,label,correct\n";
  for (const auto& [id, preds] : per_image) {
    const AggregateVerdict v = aggregate(preds);
    const bool correct = v.verdict == truth.at(id);
    ++report.test_images;
    report.correct += correct ? 1 : 0;
    out << id << ',' << preds.preds.size() << ',' << csv::fixed6(v.mean_score) << ','
        << static_cast<int>(v.verdict) << ',' << static_cast<int>(truth.at(id)) << ','
        << (correct ? 1 : 0) << '\n';
  }
  finish(out, verdicts_path);

  // Percent to one decimal: round(1000 c / n) / 10 in integers.
  const std::size_t permille = (2000 * report.correct + report.test_images) / (2 * report.test_images);
  report.accuracy_percent = static_cast<double>(permille) / 10.0;
  char text[32];
  std::snprintf(text, sizeof text, "%.1f", report.accuracy_percent);
  json acc{{"test_images", report.test_images},
           {"correct", report.correct},
           {"accuracy_percent", report.accuracy_percent},
           {"accuracy", std::string(text) + "%"}};
  auto acc_out = open_out(options.out / "accuracy.json");
  acc_out << acc.dump(2) << '\n';
  finish(acc_out, options.out / "accuracy.json");
  return report;
}

// ---------------------------------------------------------------- bench

std::string run_bench(const BenchOptions& options) {
  if (options.repetitions < 1) throw ValidationError("repetitions must be at least 1");
  const PatchStore store = load_store(options.store);
  const auto groups = group_by_image(store);

  json report{{"criterion", to_string(options.criterion)},
              {"repetitions", options.repetitions},
              {"threads", options.threads},
              {"images", json::array()}};
  std::uint64_t total_pairs = 0;
  double total_seconds = 0.0;
  for (std::size_t i = 0; i < store.images.size(); ++i) {
    if (groups[i].empty()) continue;
    const GrayImage gray = read_png_gray(store.images[i].image_path);
    for (const PatchGroup& g : groups[i]) {
      const std::size_t m = g.end - g.begin;
      const auto multisets = crop_multisets(gray, store, g);
      std::vector<double> samples;
      std::uint64_t pairs = 0;
      for (int rep = 0; rep < options.repetitions; ++rep) {
        const auto start = std::chrono::steady_clock::now();
        if (options.criterion == Criterion::kMemd) {
          MemdStats stats;
          per_patch_memd(std::span<const PixelMultiset>(multisets), {options.threads, &stats});
          pairs = stats.pair_evaluations;
        } else {
          double sink = 0.0;
          for (std::size_t k = g.begin; k < g.end; ++k) {
            const auto& p = store.patches[k];
            sink += patch_entropy(crop(gray, p.origin, p.side));
          }
          if (sink < 0.0) throw InvariantViolation("negative entropy");
        }
        samples.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
      }
      const double med = median(samples);
      const double work = options.criterion == Criterion::kMemd ? static_cast<double>(pairs)
                                                                 : static_cast<double>(m);
      total_pairs += pairs;
      total_seconds += med;
      report["images"].push_back({{"image_id", store.images[i].image_id},
                                  {"side", g.side},
                                  {"patches", m},
                                  {"pairs", pairs},
                                  {"samples_seconds", samples},
                                  {"median_seconds", med},
                                  {options.criterion == Criterion::kMemd ? "pairs_per_second"
                                                                         : "patches_per_second",
                                   med > 0.0 ? work / med : 0.0}});
    }
  }
  report["total_pairs"] = total_pairs;
  report["total_median_seconds"] = total_seconds;
  return report.dump(2);
}

}  // namespace lesionpatch
