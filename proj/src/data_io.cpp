#include "cyclesum/data_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "json.hpp"

namespace cyclesum::data {

using nlohmann::json;
namespace fs = std::filesystem;

const char* to_string(DataErrorKind kind) {
  switch (kind) {
    case DataErrorKind::missing_file: return "missing file";
    case DataErrorKind::malformed: return "malformed";
    case DataErrorKind::length_mismatch: return "length mismatch";
    case DataErrorKind::bad_segments: return "bad segments";
    case DataErrorKind::unknown_id: return "unknown id";
    case DataErrorKind::overlap: return "overlap";
  }
  return "?";
}

DataError::DataError(DataErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

void VideoRecord::validate() const {
  const std::string who = "video '" + id + "'";
  if (id.empty()) throw DataError(DataErrorKind::malformed, "record without id");
  if (k == 0 || d == 0) throw DataError(DataErrorKind::malformed, who + " has k or d = 0");
  if (features.size() != k * d) {
    throw DataError(DataErrorKind::length_mismatch, who + ": " + std::to_string(features.size()) +
                                                        " feature values for k*d = " + std::to_string(k * d));
  }
  for (double v : features) {
    if (!std::isfinite(v)) throw DataError(DataErrorKind::malformed, who + " has non-finite features");
  }
  for (std::size_t a = 0; a < gt.size(); ++a) {
    if (gt[a].size() != k) {
      throw DataError(DataErrorKind::length_mismatch, who + ": annotator " + std::to_string(a) + " has " +
                                                          std::to_string(gt[a].size()) + " gt scores for k = " +
                                                          std::to_string(k));
    }
    for (double v : gt[a]) {
      if (!(v >= 0.0 && v <= 1.0)) throw DataError(DataErrorKind::malformed, who + ": gt score outside [0, 1]");
    }
  }
  if (segments && segments->num_frames() != k) {
    throw DataError(DataErrorKind::bad_segments, who + ": segments cover " +
                                                     std::to_string(segments->num_frames()) + " frames, k = " +
                                                     std::to_string(k));
  }
  if (fps && !(*fps > 0.0)) throw DataError(DataErrorKind::malformed, who + ": fps must be > 0");
}

ad::Tensor VideoRecord::features_tensor() const { return ad::Tensor::constant({k, d}, features); }

eval::ShotSegmentation VideoRecord::shots() const {
  if (segments) return *segments;
  return eval::ShotSegmentation::uniform(k, (k + 19) / 20);
}

namespace {

template <class T>
T le_bytes(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto* p = reinterpret_cast<unsigned char*>(&v);
    std::reverse(p, p + sizeof(T));
  }
  return v;
}

std::vector<double> read_f32(const fs::path& file, std::size_t count, const std::string& id) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError(DataErrorKind::missing_file, "video '" + id + "': cannot open " + file.string());
  const auto size = fs::file_size(file);
  if (size != count * sizeof(float)) {
    throw DataError(DataErrorKind::length_mismatch, "video '" + id + "': " + file.string() + " holds " +
                                                        std::to_string(size) + " bytes, expected " +
                                                        std::to_string(count * sizeof(float)));
  }
  std::vector<float> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * sizeof(float)));
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = static_cast<double>(le_bytes(raw[i]));
  return out;
}

void write_f32(const fs::path& file, const std::vector<double>& values) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataErrorKind::missing_file, "cannot write " + file.string());
  for (double v : values) {
    const float f = le_bytes(static_cast<float>(v));
    out.write(reinterpret_cast<const char*>(&f), sizeof f);
  }
  if (!out) throw DataError(DataErrorKind::missing_file, "write failed for " + file.string());
}

std::size_t get_size(const json& rec, const char* key, const std::string& id) {
  if (!rec.contains(key) || !rec[key].is_number_unsigned()) {
    throw DataError(DataErrorKind::malformed, "video '" + id + "': \"" + key + "\" must be a non-negative integer");
  }
  return rec[key].get<std::size_t>();
}

std::vector<double> number_array(const json& arr, const std::string& id, const char* what) {
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) throw DataError(DataErrorKind::malformed, "video '" + id + "': non-numeric " + what);
    out.push_back(v.get<double>());
  }
  return out;
}

VideoRecord parse_record(const json& rec, const fs::path& base) {
  if (!rec.is_object()) throw DataError(DataErrorKind::malformed, "dataset entry is not an object");
  if (!rec.contains("id") || !rec["id"].is_string()) throw DataError(DataErrorKind::malformed, "record without string id");
  VideoRecord r;
  r.id = rec["id"].get<std::string>();
  r.k = get_size(rec, "k", r.id);
  r.d = get_size(rec, "d", r.id);
  if (!rec.contains("features_file") || !rec["features_file"].is_string()) {
    throw DataError(DataErrorKind::malformed, "video '" + r.id + "': missing features_file");
  }
  r.features = read_f32(base / rec["features_file"].get<std::string>(), r.k * r.d, r.id);

  if (rec.contains("gt")) {
    const json& gt = rec["gt"];
    if (!gt.is_array()) throw DataError(DataErrorKind::malformed, "video '" + r.id + "': gt must be an array");
    if (!gt.empty() && gt[0].is_array()) {
      for (const auto& user : gt) {
        if (!user.is_array()) throw DataError(DataErrorKind::malformed, "video '" + r.id + "': mixed gt nesting");
        r.gt.push_back(number_array(user, r.id, "gt score"));
      }
    } else {
      r.gt.push_back(number_array(gt, r.id, "gt score"));
    }
  }
  if (rec.contains("segments")) {
    std::vector<eval::Shot> shots;
    for (const auto& s : rec["segments"]) {
      if (!s.is_array() || s.size() != 2 || !s[0].is_number_unsigned() || !s[1].is_number_unsigned()) {
        throw DataError(DataErrorKind::bad_segments, "video '" + r.id + "': segment must be [start, end)");
      }
      shots.push_back({s[0].get<std::size_t>(), s[1].get<std::size_t>()});
    }
    try {
      r.segments = eval::ShotSegmentation(std::move(shots), r.k);
    } catch (const std::invalid_argument& e) {
      throw DataError(DataErrorKind::bad_segments, "video '" + r.id + "': " + e.what());
    }
  }
  if (rec.contains("fps")) {
    if (!rec["fps"].is_number()) throw DataError(DataErrorKind::malformed, "video '" + r.id + "': fps not numeric");
    r.fps = rec["fps"].get<double>();
  }
  r.validate();
  return r;
}

}  // namespace

std::vector<VideoRecord> load_dataset(const fs::path& path, std::vector<std::string>* warnings) {
  const fs::path manifest = fs::is_directory(path) ? path / "dataset.json" : path;
  std::ifstream in(manifest);
  if (!in) throw DataError(DataErrorKind::missing_file, "cannot open " + manifest.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(DataErrorKind::malformed, manifest.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw DataError(DataErrorKind::malformed, manifest.string() + ": expected an array of records");
  std::vector<VideoRecord> out;
  std::set<std::string> seen;
  for (const auto& rec : doc) {
    out.push_back(parse_record(rec, manifest.parent_path()));
    if (!seen.insert(out.back().id).second) {
      throw DataError(DataErrorKind::malformed, "duplicate video id '" + out.back().id + "'");
    }
  }
  if (out.empty() && warnings) warnings->push_back(manifest.string() + " lists no videos");
  return out;
}

void save_dataset(const fs::path& dir, const std::vector<VideoRecord>& records) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError(DataErrorKind::missing_file, "cannot create " + dir.string() + ": " + ec.message());
  json doc = json::array();
  for (const auto& r : records) {
    r.validate();
    const std::string file = r.id + ".f32";
    write_f32(dir / file, r.features);
    json rec = {{"id", r.id}, {"k", r.k}, {"d", r.d}, {"features_file", file}};
    if (r.gt.size() == 1) rec["gt"] = r.gt[0];
    if (r.gt.size() > 1) rec["gt"] = r.gt;
    if (r.segments) {
      json segs = json::array();
      for (const auto& s : r.segments->shots()) segs.push_back({s.start, s.end});
      rec["segments"] = segs;
    }
    if (r.fps) rec["fps"] = *r.fps;
    doc.push_back(rec);
  }
  std::ofstream out(dir / "dataset.json", std::ios::trunc);
  if (!out) throw DataError(DataErrorKind::missing_file, "cannot write " + (dir / "dataset.json").string());
  out << doc.dump(1) << '\n';
}

void SynthSpec::validate() const {
  if (n_videos == 0) throw std::invalid_argument("synthetic spec: n_videos must be >= 1");
  if (d == 0) throw std::invalid_argument("synthetic spec: d must be >= 1");
  if (n_events < 2) throw std::invalid_argument("synthetic spec: n_events must be >= 2");
  if (k < n_events) throw std::invalid_argument("synthetic spec: k must be >= n_events");
  if (!(salience > 0.0 && salience < 1.0)) throw std::invalid_argument("synthetic spec: salience must lie in (0, 1)");
  if (!(noise >= 0.0)) throw std::invalid_argument("synthetic spec: noise must be >= 0");
  if (!(spread > 0.0)) throw std::invalid_argument("synthetic spec: spread must be > 0");
}

std::size_t salient_event_count(const SynthSpec& spec) {
  const auto n = static_cast<std::size_t>(std::floor(spec.salience * static_cast<double>(spec.n_events)));
  return std::clamp<std::size_t>(n, 1, spec.n_events - 1);
}

std::vector<std::size_t> synthetic_event_of_frame(std::size_t k, std::size_t n_events) {
  const std::size_t len = k / n_events;
  std::vector<std::size_t> out(k);
  for (std::size_t t = 0; t < k; ++t) out[t] = std::min(t / len, n_events - 1);
  return out;
}

namespace {

std::vector<double> normalized(std::vector<double> v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

std::vector<double> unit_vector(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

}  // namespace

std::vector<VideoRecord> generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t n_salient = salient_event_count(spec);
  const auto event_of = synthetic_event_of_frame(spec.k, spec.n_events);
  const std::size_t max_shot = (spec.k + 19) / 20;

  std::vector<VideoRecord> out;
  for (std::size_t v = 0; v < spec.n_videos; ++v) {
    VideoRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "synth_%03zu", v);
    r.id = id;
    r.k = spec.k;
    r.d = spec.d;

    std::vector<std::size_t> events(spec.n_events);
    for (std::size_t e = 0; e < events.size(); ++e) events[e] = e;
    rng.shuffle(events);
    std::vector<bool> salient(spec.n_events, false);
    for (std::size_t i = 0; i < n_salient; ++i) salient[events[i]] = true;

    // Non-salient events get independent centers; a salient center sits near
    // the normalized mean of the others, making it the most representative
    // event of the video.
    std::vector<std::vector<double>> centers(spec.n_events);
    std::vector<double> mean(spec.d, 0.0);
    for (std::size_t e = 0; e < spec.n_events; ++e) {
      centers[e] = unit_vector(spec.d, rng);
      if (salient[e]) continue;
      for (std::size_t j = 0; j < spec.d; ++j) mean[j] += centers[e][j];
    }
    mean = normalized(mean);
    for (std::size_t e = 0; e < spec.n_events; ++e) {
      if (!salient[e]) continue;
      for (std::size_t j = 0; j < spec.d; ++j) centers[e][j] = mean[j] + spec.spread * centers[e][j];
      centers[e] = normalized(centers[e]);
    }

    r.features.resize(spec.k * spec.d);
    std::vector<double> gt(spec.k, 0.0);
    for (std::size_t t = 0; t < spec.k; ++t) {
      const auto& c = centers[event_of[t]];
      for (std::size_t j = 0; j < spec.d; ++j) {
        r.features[t * spec.d + j] = static_cast<float>(c[j] + spec.noise * rng.normal());
      }
      gt[t] = salient[event_of[t]] ? 1.0 : 0.0;
    }
    r.gt.push_back(std::move(gt));

    std::vector<eval::Shot> shots;
    std::size_t start = 0;
    while (start < spec.k) {
      std::size_t end = start;
      while (end < spec.k && event_of[end] == event_of[start]) ++end;
      const std::size_t len = end - start;
      const std::size_t pieces = (len + max_shot - 1) / max_shot;
      for (std::size_t p = 0; p < pieces; ++p) {
        shots.push_back({start + len * p / pieces, start + len * (p + 1) / pieces});
      }
      start = end;
    }
    r.segments = eval::ShotSegmentation(std::move(shots), spec.k);
    out.push_back(std::move(r));
  }
  return out;
}

void save_splits(const fs::path& path, const std::vector<eval::Split>& splits) {
  json doc = json::array();
  for (const auto& s : splits) doc.push_back({{"train", s.train}, {"test", s.test}});
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(DataErrorKind::missing_file, "cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

std::vector<eval::Split> load_splits(const fs::path& path, const std::vector<std::string>& known_ids) {
  std::ifstream in(path);
  if (!in) throw DataError(DataErrorKind::missing_file, "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(DataErrorKind::malformed, path.string() + ": " + e.what());
  }
  if (!doc.is_array() || doc.empty()) throw DataError(DataErrorKind::malformed, path.string() + ": expected a non-empty array");
  const std::set<std::string> known(known_ids.begin(), known_ids.end());
  std::vector<eval::Split> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& s = doc[i];
    const std::string where = path.string() + " split " + std::to_string(i);
    if (!s.is_object() || !s.contains("train") || !s.contains("test")) {
      throw DataError(DataErrorKind::malformed, where + ": needs train and test lists");
    }
    eval::Split split;
    try {
      split.train = s["train"].get<std::vector<std::string>>();
      split.test = s["test"].get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw DataError(DataErrorKind::malformed, where + ": " + e.what());
    }
    const std::set<std::string> train(split.train.begin(), split.train.end());
    for (const auto& id : split.test) {
      if (train.count(id)) throw DataError(DataErrorKind::overlap, where + ": '" + id + "' is in train and test");
    }
    if (!known.empty()) {
      for (const auto* list : {&split.train, &split.test}) {
        for (const auto& id : *list) {
          if (!known.count(id)) throw DataError(DataErrorKind::unknown_id, where + ": '" + id + "'");
        }
      }
    }
    out.push_back(std::move(split));
  }
  return out;
}

std::vector<std::vector<std::uint8_t>> reference_summaries(const VideoRecord& record, double fraction) {
  std::vector<std::vector<std::uint8_t>> out;
  const auto shots = record.shots();
  for (const auto& user : record.gt) {
    const bool binary = std::all_of(user.begin(), user.end(), [](double v) { return v == 0.0 || v == 1.0; });
    if (binary) {
      std::vector<std::uint8_t> mask(user.size());
      for (std::size_t t = 0; t < user.size(); ++t) mask[t] = user[t] == 1.0;
      out.push_back(std::move(mask));
    } else {
      out.push_back(eval::select_keyshots(user, shots, fraction).frames);
    }
  }
  return out;
}

VideoEval evaluate_scores(const VideoRecord& record, const std::vector<double>& x, double fraction,
                          eval::Aggregation aggregation) {
  if (record.gt.empty()) throw DataError(DataErrorKind::malformed, "video '" + record.id + "' has no ground truth");
  const auto pred = eval::select_keyshots(x, record.shots(), fraction);
  const auto refs = reference_summaries(record, fraction);
  std::vector<eval::EvalResult> per_user;
  std::vector<double> fs;
  for (const auto& ref : refs) {
    per_user.push_back(eval::f_measure(pred.frames, ref));
    fs.push_back(per_user.back().f_score);
  }
  VideoEval out;
  out.id = record.id;
  if (aggregation == eval::Aggregation::max) {
    const auto best = std::max_element(fs.begin(), fs.end()) - fs.begin();
    out.result = per_user[static_cast<std::size_t>(best)];
  } else {
    double p = 0.0, r = 0.0;
    for (const auto& u : per_user) {
      p += u.precision;
      r += u.recall;
    }
    out.result.precision = p / static_cast<double>(per_user.size());
    out.result.recall = r / static_cast<double>(per_user.size());
    out.result.f_score = eval::aggregate_annotators(fs, aggregation);
    out.result.selected_frames = per_user.front().selected_frames;
  }
  out.result.budget = pred.budget;
  return out;
}

double random_baseline(const VideoRecord& record, double fraction, eval::Aggregation aggregation,
                       std::size_t draws, Rng& rng) {
  if (draws == 0) throw std::invalid_argument("random_baseline: draws must be >= 1");
  double acc = 0.0;
  std::vector<double> x(record.k);
  for (std::size_t i = 0; i < draws; ++i) {
    for (auto& v : x) v = rng.uniform();
    acc += evaluate_scores(record, x, fraction, aggregation).result.f_score;
  }
  return acc / static_cast<double>(draws);
}

}  // namespace cyclesum::data
