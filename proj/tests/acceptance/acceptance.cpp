// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "lesionpatch/aggregation.hpp"
#include "lesionpatch/entropy.hpp"
#include "lesionpatch/memd.hpp"
#include "lesionpatch/pipeline.hpp"
#include "lesionpatch/selection.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace lesionpatch;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  // Records the first failure only.
  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

GrayImage from_values(const std::vector<int>& values) {
  GrayImage img(1, static_cast<Eigen::Index>(values.size()));
  for (std::size_t k = 0; k < values.size(); ++k) {
    img(0, static_cast<Eigen::Index>(k)) = static_cast<std::uint8_t>(values[k]);
  }
  return img;
}

MemdScore sorted_of(const GrayImage& a, const GrayImage& b) {
  return memd_sorted(PixelMultiset::from(a), PixelMultiset::from(b));
}

ScoreTable table_of(const std::vector<double>& scores) {
  ScoreTable t{"img", Criterion::kMemd, {}};  // MEMD range admits 1..100
  for (std::size_t i = 0; i < scores.size(); ++i) t.entries.push_back({i, scores[i]});
  return t;
}

std::set<std::size_t> band(const ScoreTable& t, Band b, double q) {
  const auto idx = select_band(t, SelectionSpec::make(t.criterion, b, q));
  return {idx.begin(), idx.end()};
}

// ------------------------------------------------------------------ MEMD

Outcome memd_oracle_equivalence() {
  Outcome o;
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> dim(1, 16), byte(0, 255);
  const auto start = Clock::now();
  int unequal = 0;
  const int pairs = 2000;
  for (int t = 0; t < pairs && o.pass; ++t) {
    const int lo = byte(rng);
    const int hi = std::min(255, lo + byte(rng) / (1 + t % 5));
    const GrayImage a = synthetic::random_gray(rng, dim(rng), dim(rng), lo, hi);
    const GrayImage b = t % 7 == 0 ? synthetic::random_gray(rng, static_cast<int>(a.cols()),
                                                            static_cast<int>(a.rows()))
                                   : synthetic::random_gray(rng, dim(rng), dim(rng));
    if (a.size() != b.size()) ++unequal;
    const MemdScore ref = memd_exhaustive(a, b);
    const MemdScore fast = sorted_of(a, b);
    o.require(fast == ref && sorted_of(b, a) == ref,
              "pair " + std::to_string(t) + ": sorted " + std::to_string(fast.distance_sum) + "/" +
                  std::to_string(fast.matches) + " vs exhaustive " +
                  std::to_string(ref.distance_sum) + "/" + std::to_string(ref.matches));
  }
  const double elapsed = seconds_since(start);
  o.require(unequal > 0, "no unequal-size pairs generated");
  o.require(elapsed < 10.0, "took " + fmt("%.2f s", elapsed));
  if (o.pass) {
    o.detail = std::to_string(pairs) + " pairs (" + std::to_string(unequal) + " unequal sizes) in " +
               fmt("%.3f s", elapsed);
  }
  return o;
}

Outcome optimal_assignment() {
  Outcome o;
  std::mt19937_64 rng(102);
  std::uniform_int_distribution<int> len(1, 8), narrow(0, 20), byte(0, 255);
  const int cases = 600;
  for (int t = 0; t < cases && o.pass; ++t) {
    const int n = len(rng);
    std::vector<int> a(n), b(n);
    const bool tight = t % 2 == 0;  // small alphabet forces many ties
    for (int k = 0; k < n; ++k) {
      a[k] = tight ? narrow(rng) : byte(rng);
      b[k] = tight ? narrow(rng) : byte(rng);
    }
    const std::uint64_t best = oracle::min_pairing_sum(a, b);
    const MemdScore s = sorted_of(from_values(a), from_values(b));
    o.require(s.distance_sum == best && s.matches == static_cast<std::uint64_t>(n),
              "case " + std::to_string(t) + ": " + std::to_string(s.distance_sum) +
                  " vs brute-force " + std::to_string(best));
  }
  if (o.pass) o.detail = std::to_string(cases) + " cases of 1..8 pixels";
  return o;
}

Outcome multichannel_counterexample() {
  Outcome o;
  const auto one = [](std::array<std::uint8_t, 3> p) {
    RgbImage img(1, 1);
    img.set_pixel(0, 0, p);
    return img;
  };
  const std::array<std::uint8_t, 3> p1{135, 18, 89}, p2{130, 16, 86}, p3{12, 134, 1};
  const MemdScore z23 = memd_multichannel_naive(one(p2), one(p3));
  const MemdScore z21 = memd_multichannel_naive(one(p2), one(p1));
  o.require(z23 == MemdScore{118, 1}, "zeta(p2,p3) = " + fmt("%g", z23.value()));
  o.require(z21 == MemdScore{5, 1}, "zeta(p2,p1) = " + fmt("%g", z21.value()));
  if (o.pass) o.detail = "zeta(p2,p3)=118 zeta(p2,p1)=5";
  return o;
}

Outcome memd_boundaries() {
  Outcome o;
  std::mt19937_64 rng(103);
  std::uniform_int_distribution<int> dim(1, 32);
  for (int t = 0; t < 100 && o.pass; ++t) {
    const GrayImage a = synthetic::random_gray(rng, dim(rng), dim(rng));
    o.require(sorted_of(a, a).distance_sum == 0, "zeta(A,A) != 0 at case " + std::to_string(t));
    o.require(memd_exhaustive(a, a).distance_sum == 0, "exhaustive zeta(A,A) != 0");
  }
  const GrayImage white = GrayImage::Constant(16, 16, 255);
  const GrayImage black = GrayImage::Zero(16, 16);
  o.require(sorted_of(white, black).value() == 255.0, "zeta(white, black) != 255");
  o.require(sorted_of(black, GrayImage::Constant(3, 5, 255)).value() == 255.0,
            "zeta(black 16x16, white 5x3) != 255");

  double lo = 255.0, hi = 0.0;
  std::uniform_int_distribution<int> byte(0, 255);
  for (int t = 0; t < 2000; ++t) {
    const GrayImage a = synthetic::random_gray(rng, dim(rng), dim(rng), 0, byte(rng));
    const GrayImage b = synthetic::random_gray(rng, dim(rng), dim(rng), byte(rng), 255);
    const double v = sorted_of(a, b).value();
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<GrayImage> patches;
  for (int k = 0; k < 40; ++k) patches.push_back(synthetic::random_gray(rng, 8, 8, 0, byte(rng)));
  patches.push_back(white.block(0, 0, 8, 8));
  for (const auto& s : per_patch_memd(std::span<const GrayImage>(patches))) {
    lo = std::min(lo, s.memd_mean);
    hi = std::max(hi, s.memd_mean);
  }
  o.require(lo >= 0.0 && hi <= 255.0, "score outside [0,255]: " + fmt("%g", lo) + " " + fmt("%g", hi));
  if (o.pass) o.detail = "observed range [" + fmt("%.3f", lo) + ", " + fmt("%.3f", hi) + "]";
  return o;
}

// --------------------------------------------------------------- entropy

Outcome entropy_correctness() {
  Outcome o;
  o.require(patch_entropy(GrayImage::Constant(32, 32, 77)) == 0.0, "constant patch not 0");

  GrayImage two(8, 8);
  for (Eigen::Index k = 0; k < two.size(); ++k) two.data()[k] = k % 2 ? 200 : 3;
  o.require(std::abs(patch_entropy(two) - 1.0) <= 1e-12, "two equal bins: " + fmt("%.17g", patch_entropy(two)));

  std::mt19937_64 rng(104);
  std::vector<int> levels(256);
  std::iota(levels.begin(), levels.end(), 0);
  std::shuffle(levels.begin(), levels.end(), rng);
  GrayImage perm(16, 16);
  for (int k = 0; k < 256; ++k) perm.data()[k] = static_cast<std::uint8_t>(levels[k]);
  o.require(std::abs(patch_entropy(perm) - 8.0) <= 1e-12, "permutation patch: " + fmt("%.17g", patch_entropy(perm)));

  std::uniform_int_distribution<int> byte(0, 255), side_pick(0, 3);
  const int sides[] = {4, 16, 32, 64};
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int lo = byte(rng);
    const int hi = std::min(255, lo + byte(rng) / (1 + t % 6));
    const int s = sides[side_pick(rng)];
    const GrayImage p = synthetic::random_gray(rng, s, s, lo, hi);
    const double h = patch_entropy(p);
    worst = std::max(worst, std::abs(h - oracle::entropy(synthetic::pixels_of(p))));
    o.require(h >= 0.0 && h <= 8.0, "entropy outside [0,8]: " + fmt("%.17g", h));
  }
  o.require(worst <= 1e-9, "max deviation from oracle " + fmt("%.3g", worst));
  if (o.pass) o.detail = "1000 random patches, max |diff| " + fmt("%.2e", worst);
  return o;
}

// ------------------------------------------------------------- grayscale

Outcome grayscale() {
  Outcome o;
  RgbImage grays(256, 1);
  for (int g = 0; g < 256; ++g) {
    const auto v = static_cast<std::uint8_t>(g);
    grays.set_pixel(g, 0, {v, v, v});
  }
  const GrayImage g1 = to_grayscale(grays);
  for (int g = 0; g < 256; ++g) {
    o.require(g1(0, g) == oracle::luma(g, g, g), "gray triple " + std::to_string(g));
  }

  std::mt19937_64 rng(105);
  const RgbImage rgb = synthetic::random_rgb(rng, 100, 100);
  const GrayImage g2 = to_grayscale(rgb);
  int mismatches = 0;
  for (int y = 0; y < 100; ++y) {
    for (int x = 0; x < 100; ++x) {
      const auto p = rgb.pixel(x, y);
      if (g2(y, x) != oracle::luma(p[0], p[1], p[2])) ++mismatches;
    }
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " of 10000 random triples differ");
  if (o.pass) o.detail = "256 gray + 10000 random triples exact";
  return o;
}

// ---------------------------------------------------------------- tiling

Outcome tiling() {
  Outcome o;
  std::mt19937_64 rng(106);
  std::uniform_int_distribution<int> dim(1, 700);
  for (int t = 0; t < 60 && o.pass; ++t) {
    const int w = dim(rng), h = dim(rng);
    for (int s : kPatchSides) {
      const auto n = tile_roi(w, h, Mask::Constant(h, w, true), s).size();
      o.require(n == static_cast<std::size_t>((w / s) * (h / s)),
                std::to_string(w) + "x" + std::to_string(h) + " side " + std::to_string(s) +
                    ": " + std::to_string(n) + " patches");
    }
  }

  std::uniform_int_distribution<int> mdim(20, 300), sixteenth(1, 16);
  std::size_t kept = 0;
  for (int t = 0; t < 100 && o.pass; ++t) {
    const int w = mdim(rng), h = mdim(rng);
    const Mask mask = synthetic::random_mask(rng, w, h);
    int x0 = w, y0 = h;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (mask(y, x)) {
          x0 = std::min(x0, x);
          y0 = std::min(y0, y);
        }
      }
    }
    const int k = sixteenth(rng);  // threshold k/16 keeps the comparison exact
    for (int s : {32, 64, 128}) {
      std::vector<Origin> expected;
      for (int cy = y0; cy + s <= h; cy += s) {
        for (int cx = x0; cx + s <= w; cx += s) {
          long count = 0;
          for (int y = cy; y < cy + s; ++y) {
            for (int x = cx; x < cx + s; ++x) count += mask(y, x);
          }
          if (16 * count >= static_cast<long>(k) * s * s) expected.push_back({cx, cy});
        }
      }
      const auto got = tile_roi(w, h, mask, s, k / 16.0);
      kept += got.size();
      o.require(got.size() == expected.size() &&
                    std::equal(got.begin(), got.end(), expected.begin(),
                               [](Origin a, Origin b) { return a.x == b.x && a.y == b.y; }),
                "random mask " + std::to_string(t) + " side " + std::to_string(s));
    }
  }
  if (o.pass) o.detail = "full masks + 100 random masks (" + std::to_string(kept) + " cells kept)";
  return o;
}

// ------------------------------------------------------------- selection

Outcome selection() {
  Outcome o;
  std::vector<double> scores(100);
  std::iota(scores.begin(), scores.end(), 1.0);
  std::mt19937_64 rng(107);
  std::shuffle(scores.begin(), scores.end(), rng);
  const ScoreTable t = table_of(scores);

  const double t_low = oracle::quantile(scores, 0.15);
  const double t_high = oracle::quantile(scores, 0.85);
  std::size_t oracle_low = 0, oracle_high = 0;
  for (double s : scores) {
    oracle_low += s <= t_low;
    oracle_high += s >= t_high;
  }
  const auto low = band(t, Band::kLow, 0.15);
  const auto high = band(t, Band::kHigh, 0.15);
  o.require(low.size() == 15 && oracle_low == 15, "low band kept " + std::to_string(low.size()));
  o.require(high.size() == 15 && oracle_high == 15, "high band kept " + std::to_string(high.size()));
  for (auto i : low) o.require(scores[i] <= 15.0, "low band holds score " + fmt("%g", scores[i]));
  for (auto i : high) o.require(scores[i] >= 86.0, "high band holds score " + fmt("%g", scores[i]));

  const ScoreTable same = table_of(std::vector<double>(40, 3.25));
  o.require(band(same, Band::kLow, 0.15).size() == 40 && band(same, Band::kHigh, 0.15).size() == 40,
            "identical scores do not saturate both bands");
  const ScoreTable single = table_of({4.5});
  for (double q : {0.01, 0.15, 0.3, 0.49}) {
    o.require(band(single, Band::kLow, q) == std::set<std::size_t>{0} &&
                  band(single, Band::kHigh, q) == std::set<std::size_t>{0},
              "single-patch table emptied at q=" + fmt("%g", q));
  }

  std::uniform_int_distribution<int> len(1, 300), coarse(0, 50);
  std::uniform_real_distribution<double> fine(0.0, 8.0);
  for (int r = 0; r < 100 && o.pass; ++r) {
    std::vector<double> v(len(rng));
    for (auto& x : v) x = r % 2 ? coarse(rng) * 0.5 : fine(rng);  // odd tables carry ties
    const ScoreTable rt = table_of(v);
    for (Band b : {Band::kLow, Band::kHigh}) {
      const auto narrow = band(rt, b, 0.15);
      const auto wide = band(rt, b, 0.30);
      o.require(!narrow.empty(), "empty band on random table " + std::to_string(r));
      o.require(std::includes(wide.begin(), wide.end(), narrow.begin(), narrow.end()),
                "q=0.15 not within q=0.30 on random table " + std::to_string(r));
    }
  }
  if (o.pass) o.detail = "15/15 on 1..100; saturation, single patch, 100 monotone tables";
  return o;
}

// ----------------------------------------------------------------- split

Outcome split() {
  Outcome o;
  std::mt19937_64 rng(108);
  for (std::size_t n = 1; n <= 2000 && o.pass; ++n) {
    const SplitSizes s = split_sizes(n);
    const double want_test = 0.1 * static_cast<double>(n);
    const double want_val = 0.2 * static_cast<double>(n - s.test);
    o.require(s.train + s.val + s.test == n, "sizes do not add up at n=" + std::to_string(n));
    o.require(std::abs(static_cast<double>(s.test) - want_test) <= 1.0 &&
                  std::abs(static_cast<double>(s.val) - want_val) <= 1.0,
              "n=" + std::to_string(n) + ": test " + std::to_string(s.test) + " val " +
                  std::to_string(s.val));
    if (n % 97 != 0) continue;
    std::vector<std::string> ids;
    for (std::size_t k = 0; k < n; ++k) ids.push_back("IMG_" + std::to_string(rng()));
    const SplitAssignment a = assign_splits(ids, n);
    std::map<Split, std::size_t> counts;
    for (const auto& [id, sp] : a.splits) ++counts[sp];
    o.require(a.splits.size() == n && counts[Split::kTest] == s.test && counts[Split::kVal] == s.val,
              "assignment counts differ from split_sizes at n=" + std::to_string(n));
    std::shuffle(ids.begin(), ids.end(), rng);
    o.require(assign_splits(ids, n).splits == a.splits, "rerun with same seed differs at n=" + std::to_string(n));
  }
  if (o.pass) o.detail = "n=1..2000 within +-1; assignments stable under input order";
  return o;
}

// ----------------------------------------------------------- aggregation

Outcome aggregation() {
  Outcome o;
  struct Row {
    std::vector<std::uint8_t> preds;
    Label verdict;
    double mean;
  };
  const Row rows[] = {
      {{0, 0, 0}, Label::kBenign, 0.0},     {{1, 0, 1, 1}, Label::kMalignant, 0.75},
      {{0, 1}, Label::kMalignant, 0.5},     {{1, 0, 0, 1}, Label::kMalignant, 0.5},
      {{0, 0, 1}, Label::kBenign, 1.0 / 3}, {{1}, Label::kMalignant, 1.0},
      {{0}, Label::kBenign, 0.0},
  };
  for (const auto& r : rows) {
    const auto v = aggregate({"img", r.preds});
    o.require(v.verdict == r.verdict && std::abs(v.mean_score - r.mean) < 1e-15,
              "preds of size " + std::to_string(r.preds.size()) + " mean " + fmt("%g", r.mean));
  }
  bool threw = false;
  try {
    aggregate({"img", {}});
  } catch (const EmptyPredictions&) {
    threw = true;
  }
  o.require(threw, "empty predictions accepted");
  if (o.pass) o.detail = "7 rows incl. mean 0.5 -> malignant; empty input rejected";
  return o;
}

// ------------------------------------------------------------ end to end

// Runs extract, score and select into `root`; returns file name -> bytes of
// every manifest and histogram export.
std::map<std::string, std::string> run_pipeline(const fs::path& data, const fs::path& root,
                                                unsigned threads) {
  ExtractOptions ex;
  ex.dataset_root = data;
  ex.out = root / "store";
  ex.threads = threads;
  run_extract(ex);
  for (Criterion c : {Criterion::kEntropy, Criterion::kMemd}) run_score({root / "store", c, threads});

  std::map<std::string, std::string> files;
  for (Criterion c : {Criterion::kEntropy, Criterion::kMemd}) {
    for (Band b : {Band::kLow, Band::kHigh}) {
      SelectOptions sel;
      sel.store = root / "store";
      sel.spec = SelectionSpec::make(c, b, 0.15);
      sel.seed = 2024;
      sel.out = root / "manifests";
      for (const auto& p : run_select(sel)) files[p.filename().string()] = synthetic::slurp(p);
    }
    const auto hist = "histogram_" + std::string(to_string(c)) + ".json";
    files[hist] = synthetic::slurp(root / "store" / hist);
  }
  return files;
}

Outcome end_to_end_determinism() {
  Outcome o;
  const fs::path root = synthetic::temp_dir("acceptance_e2e");
  synthetic::write_corpus(root / "data", {.images = 20, .seed = 11});
  const auto start = Clock::now();
  const auto a = run_pipeline(root / "data", root / "run1_t1", 1);
  const auto b = run_pipeline(root / "data", root / "run2_t1", 1);
  const auto c = run_pipeline(root / "data", root / "run3_t8", 8);
  const auto d = run_pipeline(root / "data", root / "run4_t8", 8);

  std::size_t manifests = 0, rows = 0;
  for (const auto& [name, bytes] : a) {
    if (name.starts_with("manifest_")) {
      ++manifests;
      rows += static_cast<std::size_t>(std::count(bytes.begin(), bytes.end(), '\n'));
    }
  }
  o.require(manifests >= 4 && rows > 0, "pipeline produced no manifests");
  for (const auto* other : {&b, &c, &d}) {
    o.require(other->size() == a.size(), "different set of output files");
    for (const auto& [name, bytes] : a) {
      const auto it = other->find(name);
      o.require(it != other->end() && it->second == bytes, name + " differs between runs");
    }
  }

  // Every image sits in one split across all manifests.
  std::map<std::string, std::string> split_of;
  for (const auto& [name, bytes] : a) {
    if (!name.starts_with("manifest_")) continue;
    for (const auto& r : read_manifest(root / "run1_t1" / "manifests" / name).rows) {
      const std::string s(to_string(*r.split));
      const auto [it, fresh] = split_of.emplace(r.image_id, s);
      o.require(fresh || it->second == s, r.image_id + " appears in two splits");
    }
  }
  if (o.pass) {
    o.detail = std::to_string(a.size()) + " files identical over 2 runs x threads {1,8}, " +
               fmt("%.2f s", seconds_since(start));
  }
  return o;
}

// ------------------------------------------------------------ performance

Outcome performance() {
  Outcome o;
  std::mt19937_64 rng(109);
  std::vector<GrayImage> patches;
  for (int k = 0; k < 500; ++k) patches.push_back(synthetic::random_gray(rng, 32, 32));
  MemdStats stats;
  const auto start = Clock::now();
  const auto summary = per_patch_memd(std::span<const GrayImage>(patches), {1, &stats});
  const double elapsed = seconds_since(start);
  o.require(summary.size() == 500, "wrong summary size");
  o.require(stats.pair_evaluations == 124750,
            "reported " + std::to_string(stats.pair_evaluations) + " pairs");
  o.require(elapsed < 5.0, "took " + fmt("%.3f s", elapsed));
  if (o.pass) {
    o.detail = std::to_string(stats.pair_evaluations) + " pairs in " + fmt("%.3f s", elapsed) +
               " on one thread";
  }
  return o;
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"memd oracle equivalence", memd_oracle_equivalence},
      {"memd optimal assignment", optimal_assignment},
      {"multichannel counterexample", multichannel_counterexample},
      {"memd boundary scores", memd_boundaries},
      {"entropy correctness", entropy_correctness},
      {"grayscale conversion", grayscale},
      {"tiling", tiling},
      {"selection bands", selection},
      {"train/val/test split", split},
      {"aggregation truth table", aggregation},
      {"end-to-end determinism", end_to_end_determinism},
      {"performance smoke", performance},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s  %-28s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failures,
              std::size(criteria));
  return failures == 0 ? 0 : 1;
}
