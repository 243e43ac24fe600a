#include <cmath>
#include <filesystem>
#include <fstream>

#include "cyclesum/data_io.hpp"
#include "doctest.h"

using namespace cyclesum;
using namespace cyclesum::data;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("cyclesum_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

void write_floats(const fs::path& p, std::size_t n) {
  std::ofstream out(p, std::ios::binary);
  for (std::size_t i = 0; i < n; ++i) {
    const float v = 0.25f * static_cast<float>(i);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
}

DataErrorKind load_error(const fs::path& dir) {
  try {
    load_dataset(dir);
  } catch (const DataError& e) {
    return e.kind();
  }
  FAIL("expected a DataError");
  return DataErrorKind::malformed;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i], aa += a[i] * a[i], bb += b[i] * b[i];
  return ab / std::sqrt(aa * bb);
}

std::vector<double> frame(const VideoRecord& r, std::size_t t) {
  return {r.features.begin() + static_cast<long>(t * r.d), r.features.begin() + static_cast<long>((t + 1) * r.d)};
}

}  // namespace

TEST_CASE("dataset round trip") {
  auto dir = scratch("roundtrip");
  SynthSpec spec;
  spec.n_videos = 3;
  spec.k = 20;
  spec.d = 4;
  auto recs = generate_synthetic(spec);
  recs[1].gt.push_back(std::vector<double>(20, 0.5));
  recs[1].fps = 29.97;
  recs[2].segments.reset();
  save_dataset(dir, recs);
  auto back = load_dataset(dir);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].id == recs[i].id);
    CHECK(back[i].features == recs[i].features);
    CHECK(back[i].gt == recs[i].gt);
    CHECK(back[i].fps == recs[i].fps);
    CHECK(back[i].segments.has_value() == recs[i].segments.has_value());
    CHECK(back[i].shots().shots() == recs[i].shots().shots());
  }
  // The manifest path works as well as the directory.
  CHECK(load_dataset(dir / "dataset.json").size() == 3);
  // Default shots: ceil(k / 20) frames.
  CHECK(back[2].shots().min_length() == 1);
}

TEST_CASE("load errors are named") {
  auto dir = scratch("errors");
  write_floats(dir / "a.f32", 12);

  write_text(dir / "dataset.json", "[]");
  std::vector<std::string> warnings;
  CHECK(load_dataset(dir, &warnings).empty());
  CHECK(warnings.size() == 1);

  write_text(dir / "dataset.json", R"([{"id":"a","k":4,"d":3,"features_file":"a.f32","gt":[1,0,0]}])");
  try {
    load_dataset(dir);
    FAIL("expected rejection");
  } catch (const DataError& e) {
    CHECK(e.kind() == DataErrorKind::length_mismatch);
    CHECK(std::string(e.what()).find("'a'") != std::string::npos);
  }

  write_text(dir / "dataset.json", R"([{"id":"a","k":5,"d":3,"features_file":"a.f32"}])");
  CHECK(load_error(dir) == DataErrorKind::length_mismatch);
  write_text(dir / "dataset.json", R"([{"id":"a","k":4,"d":3,"features_file":"missing.f32"}])");
  CHECK(load_error(dir) == DataErrorKind::missing_file);
  write_text(dir / "dataset.json", R"([{"id":"a","k":4,"d":3,"features_file":"a.f32","gt":[1,0,"x",0]}])");
  CHECK(load_error(dir) == DataErrorKind::malformed);
  write_text(dir / "dataset.json", R"([{"id":"a","k":4,"d":3,"features_file":"a.f32","segments":[[0,2],[3,4]]}])");
  CHECK(load_error(dir) == DataErrorKind::bad_segments);
  write_text(dir / "dataset.json", R"([{"id":"a","k":4,"d":3,"features_file":"a.f32","gt":[1,0,2,0]}])");
  CHECK(load_error(dir) == DataErrorKind::malformed);
  write_text(dir / "dataset.json", "[{\"id\": ");
  CHECK(load_error(dir) == DataErrorKind::malformed);
  write_text(dir / "dataset.json",
             R"([{"id":"a","k":4,"d":3,"features_file":"a.f32"},{"id":"a","k":4,"d":3,"features_file":"a.f32"}])");
  CHECK(load_error(dir) == DataErrorKind::malformed);
  CHECK(load_error(dir / "nowhere") == DataErrorKind::missing_file);

  write_text(dir / "dataset.json",
             R"([{"id":"a","k":4,"d":3,"features_file":"a.f32","gt":[[1,0,0,1],[0,0.5,0.5,0]],"segments":[[0,2],[2,4]]}])");
  auto ok = load_dataset(dir);
  CHECK(ok[0].gt.size() == 2);
  CHECK(ok[0].features[5] == 1.25);
}

TEST_CASE("synthetic benchmark") {
  SynthSpec spec;
  auto recs = generate_synthetic(spec);
  REQUIRE(recs.size() == 20);
  const auto events = synthetic_event_of_frame(96, 6);
  CHECK(salient_event_count(spec) == 1);

  SUBCASE("shape, gt and shots") {
    for (const auto& r : recs) {
      CHECK_NOTHROW(r.validate());
      CHECK(r.k == 96);
      CHECK(r.d == 32);
      REQUIRE(r.gt.size() == 1);
      double salient = 0;
      for (double g : r.gt[0]) salient += g;
      CHECK(salient == 16);
      // gt is constant within an event and shots never straddle events.
      for (std::size_t t = 1; t < 96; ++t)
        if (events[t] == events[t - 1]) CHECK(r.gt[0][t] == r.gt[0][t - 1]);
      const auto seg = r.shots();
      for (const auto& s : seg.shots()) {
        CHECK(s.length() <= 5);
        CHECK(events[s.start] == events[s.end - 1]);
      }
    }
  }
  SUBCASE("salient count rule") {
    SynthSpec s = spec;
    s.salience = 0.01;
    CHECK(salient_event_count(s) == 1);
    s.salience = 0.99;
    CHECK(salient_event_count(s) == 5);
    s.salience = 0.5;
    CHECK(salient_event_count(s) == 3);
  }
  SUBCASE("events with zero noise are constant unit vectors") {
    SynthSpec s = spec;
    s.noise = 0.0;
    s.n_videos = 2;
    for (const auto& r : generate_synthetic(s)) {
      for (std::size_t t = 1; t < 96; ++t)
        if (events[t] == events[t - 1]) CHECK(frame(r, t) == frame(r, t - 1));
      double norm = 0;
      for (double v : frame(r, 0)) norm += v * v;
      CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  SUBCASE("different seeds give different centers") {
    SynthSpec a = spec, b = spec;
    a.noise = b.noise = 0.0;
    b.seed = 8;
    auto ra = generate_synthetic(a), rb = generate_synthetic(b);
    double worst = -1;
    for (std::size_t ea = 0; ea < 6; ++ea)
      for (std::size_t eb = 0; eb < 6; ++eb)
        worst = std::max(worst, cosine(frame(ra[0], ea * 16), frame(rb[0], eb * 16)));
    CHECK(worst < 0.99);
  }
  SUBCASE("deterministic per seed") {
    auto again = generate_synthetic(spec);
    for (std::size_t i = 0; i < recs.size(); ++i) CHECK(again[i].features == recs[i].features);
  }
  SUBCASE("an event-clustering oracle recovers gt exactly") {
    // Cluster frames by nearest noise-free center; the salient event is the
    // one whose center is closest to the mean of the others.
    for (const auto& r : recs) {
      std::vector<std::vector<double>> c(6, std::vector<double>(32, 0.0));
      for (std::size_t t = 0; t < 96; ++t)
        for (std::size_t j = 0; j < 32; ++j) c[events[t]][j] += r.features[t * 32 + j] / 16.0;
      std::size_t best = 0;
      double best_cos = -2;
      for (std::size_t e = 0; e < 6; ++e) {
        std::vector<double> rest(32, 0.0);
        for (std::size_t o = 0; o < 6; ++o)
          if (o != e)
            for (std::size_t j = 0; j < 32; ++j) rest[j] += c[o][j];
        const double cs = cosine(c[e], rest);
        if (cs > best_cos) best_cos = cs, best = e;
      }
      for (std::size_t t = 0; t < 96; ++t) CHECK(r.gt[0][t] == (events[t] == best ? 1.0 : 0.0));
    }
  }
  SUBCASE("invalid specs") {
    SynthSpec s = spec;
    s.n_videos = 0;
    CHECK_THROWS(generate_synthetic(s));
    s = spec;
    s.n_events = 1;
    CHECK_THROWS(generate_synthetic(s));
    s = spec;
    s.salience = 1.0;
    CHECK_THROWS(generate_synthetic(s));
  }
}

TEST_CASE("splits files") {
  auto dir = scratch("splits");
  std::vector<std::string> ids;
  for (int i = 0; i < 25; ++i) ids.push_back("v" + std::to_string(i));
  auto splits = eval::make_splits(ids, 5);
  save_splits(dir / "splits.json", splits);
  auto back = load_splits(dir / "splits.json", ids);
  REQUIRE(back.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(back[i].train == splits[i].train);
    CHECK(back[i].test == splits[i].test);
    CHECK(back[i].train.size() == 20);
    CHECK(back[i].test.size() == 5);
  }
  try {
    load_splits(dir / "splits.json", {"v0", "v1"});
    FAIL("expected unknown id");
  } catch (const DataError& e) {
    CHECK(e.kind() == DataErrorKind::unknown_id);
  }
  write_text(dir / "bad.json", R"([{"train":["a","b"],"test":["b"]}])");
  try {
    load_splits(dir / "bad.json");
    FAIL("expected overlap");
  } catch (const DataError& e) {
    CHECK(e.kind() == DataErrorKind::overlap);
  }
}

TEST_CASE("scoring against ground truth") {
  SynthSpec spec;
  spec.n_videos = 2;
  auto recs = generate_synthetic(spec);
  const auto& r = recs[0];
  // Ground truth scored against itself: the binary gt event is 16 frames but
  // the budget is 14, so use the graded reference path for an exact match.
  VideoRecord graded = r;
  graded.gt = {std::vector<double>(96, 0.0)};
  for (std::size_t t = 0; t < 96; ++t) graded.gt[0][t] = 0.1 + 0.8 * r.gt[0][t] * (t % 2 ? 1.0 : 0.99);
  auto refs = reference_summaries(graded, 0.15);
  std::vector<double> x(refs[0].begin(), refs[0].end());
  CHECK(evaluate_scores(graded, x, 0.15, eval::Aggregation::mean).result.f_score == 1.0);

  auto perfect = evaluate_scores(r, r.gt[0], 0.15, eval::Aggregation::mean);
  CHECK(perfect.result.precision == 1.0);
  CHECK(perfect.result.budget == 14);
  // Only whole sub-shots fit, so recall is selected / 16 with P = 1.
  const double rec = static_cast<double>(perfect.result.selected_frames) / 16.0;
  CHECK(perfect.result.selected_frames >= 10);
  CHECK(perfect.result.selected_frames <= 14);
  CHECK(perfect.result.recall == doctest::Approx(rec).epsilon(1e-12));
  CHECK(perfect.result.f_score == doctest::Approx(2.0 * rec / (1.0 + rec)).epsilon(1e-12));

  Rng rng(3);
  const double base = random_baseline(r, 0.15, eval::Aggregation::mean, 100, rng);
  CHECK(base > 0.0);
  CHECK(base < 0.4);

  VideoRecord multi = r;
  multi.gt.push_back(std::vector<double>(96, 0.0));
  multi.gt.back()[0] = 1.0;
  auto mean = evaluate_scores(multi, r.gt[0], 0.15, eval::Aggregation::mean);
  auto max = evaluate_scores(multi, r.gt[0], 0.15, eval::Aggregation::max);
  CHECK(max.result.f_score == perfect.result.f_score);
  CHECK(mean.result.f_score == doctest::Approx(perfect.result.f_score / 2.0));
}
