#include "vmr/datamodel.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace vmr {

using nlohmann::json;

namespace {
constexpr double kTimeTol = 1e-9;

const std::set<std::string>& known_splits() {
  static const std::set<std::string> s = {"train", "cd-test-ood",
                                          "cg-novel-word",
                                          "cg-novel-composition", "iid-test"};
  return s;
}
}  // namespace

void VideoFeatureSequence::validate() const {
  const auto L = snippets.rows();
  if ((Eigen::Index)mask.size() != L)
    throw ValidationError("video " + video_id + ": mask/feature size mismatch");
  const int real = real_count();
  if (real < 1 || real > L)
    throw ValidationError("video " + video_id + ": bad period count");
  bool seen_pad = false;
  for (Eigen::Index i = 0; i < L; ++i) {
    if (mask[i] && seen_pad)
      throw ValidationError("video " + video_id + ": mask is not prefix-true");
    if (!mask[i]) seen_pad = true;
  }
  for (int i = 0; i < real; ++i)
    if (!mask[i])
      throw ValidationError("video " + video_id + ": real rows not masked in");
  if (std::abs(periods.front().t_start) > kTimeTol ||
      std::abs(periods.back().t_end - duration) > kTimeTol)
    throw ValidationError("video " + video_id +
                          ": periods do not cover [0, duration]");
  for (int i = 0; i < real; ++i) {
    if (periods[i].t_end <= periods[i].t_start)
      throw ValidationError("video " + video_id + ": degenerate period");
    if (i > 0 && std::abs(periods[i].t_start - periods[i - 1].t_end) > kTimeTol)
      throw ValidationError("video " + video_id + ": periods not contiguous");
  }
  for (Eigen::Index i = real; i < L; ++i)
    if (snippets.row(i).cwiseAbs().maxCoeff() != 0.0)
      throw ValidationError("video " + video_id + ": padded row not zero");
}

void Query::validate() const {
  if (embeddings.rows() < 1) throw ValidationError("query " + query_id + ": empty");
  if ((Eigen::Index)mask.size() != embeddings.rows())
    throw ValidationError("query " + query_id + ": mask size mismatch");
  bool any = false;
  for (auto m : mask) any = any || m;
  if (!any) throw ValidationError("query " + query_id + ": all positions masked");
}

void MomentAnnotation::validate(double duration) const {
  if (!(tau_s >= 0.0 && tau_s < tau_e && tau_e <= duration + kTimeTol))
    throw ValidationError("annotation outside [0, duration]");
  if (start_idx > end_idx) throw ValidationError("annotation start_idx > end_idx");
}

int seconds_to_snippet_index(double t,
                             const std::vector<SnippetPeriod>& periods) {
  if (periods.empty()) throw std::out_of_range("no periods");
  const double duration = periods.back().t_end;
  if (t < 0.0 || t > duration)
    throw std::out_of_range("time " + std::to_string(t) +
                            " outside [0, " + std::to_string(duration) + "]");
  if (t == duration) return static_cast<int>(periods.size()) - 1;
  // Periods are sorted and contiguous: binary search on t_end.
  int lo = 0, hi = static_cast<int>(periods.size()) - 1;
  while (lo < hi) {
    int mid = (lo + hi) / 2;
    if (t < periods[mid].t_end)
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

VideoFeatureSequence build_snippet_grid(
    const nn::Mat& raw_features, double duration, const std::string& video_id,
    const std::optional<std::vector<SnippetPeriod>>& raw_periods) {
  const Eigen::Index n = raw_features.rows();
  const Eigen::Index d = raw_features.cols();
  if (n < 1) throw ValidationError("build_snippet_grid: empty feature matrix");
  if (duration <= 0.0) throw ValidationError("build_snippet_grid: bad duration");

  std::vector<SnippetPeriod> in_periods;
  if (raw_periods) {
    if ((Eigen::Index)raw_periods->size() != n)
      throw ValidationError("build_snippet_grid: period count mismatch");
    in_periods = *raw_periods;
  } else {
    in_periods.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      in_periods[i] = {duration * static_cast<double>(i) / n,
                       duration * static_cast<double>(i + 1) / n};
    }
  }

  VideoFeatureSequence out;
  out.video_id = video_id;
  out.duration = duration;
  out.snippets = nn::Mat::Zero(kMaxSnippets, d);
  out.mask.assign(kMaxSnippets, 0);

  if (n <= kMaxSnippets) {
    out.snippets.topRows(n) = raw_features;
    out.periods = std::move(in_periods);
    for (Eigen::Index i = 0; i < n; ++i) out.mask[i] = 1;
    return out;
  }

  // Max-pool consecutive groups down to exactly kMaxSnippets rows.
  out.periods.resize(kMaxSnippets);
  for (int i = 0; i < kMaxSnippets; ++i) {
    const Eigen::Index first = n * i / kMaxSnippets;
    const Eigen::Index last = n * (i + 1) / kMaxSnippets - 1;
    nn::Mat::RowXpr row = out.snippets.row(i);
    row = raw_features.row(first);
    for (Eigen::Index j = first + 1; j <= last; ++j)
      row = row.cwiseMax(raw_features.row(j));
    out.periods[i] = {in_periods[first].t_start, in_periods[last].t_end};
    out.mask[i] = 1;
  }
  return out;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest " + path.string());

  DatasetManifest m;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError("manifest " + path.string() + " line " +
                            std::to_string(lineno) + ": " + e.what());
    }
    const std::string type = j.value("type", "");
    if (type == "manifest") {
      m.split_name = j.at("split").get<std::string>();
      if (!known_splits().count(m.split_name))
        throw ValidationError("manifest line " + std::to_string(lineno) +
                              ": unknown split '" + m.split_name + "'");
      header_seen = true;
    } else if (type == "entry") {
      ManifestEntry e;
      try {
        e.video_id = j.at("video_id").get<std::string>();
        e.features_path =
            (path.parent_path() / j.at("features").get<std::string>()).string();
        e.duration = j.at("duration").get<double>();
        e.query_id = j.at("query_id").get<std::string>();
        e.query_text = j.at("query").get<std::string>();
        e.tau_s = j.at("tau_s").get<double>();
        e.tau_e = j.at("tau_e").get<double>();
        if (j.contains("periods")) {
          std::vector<SnippetPeriod> ps;
          for (const auto& pr : j.at("periods"))
            ps.push_back({pr.at(0).get<double>(), pr.at(1).get<double>()});
          e.periods = std::move(ps);
        }
      } catch (const json::exception& ex) {
        throw ValidationError("manifest line " + std::to_string(lineno) +
                              ": " + ex.what());
      }
      const int index = static_cast<int>(m.entries.size());
      if (e.duration <= 0.0)
        throw ValidationError("manifest entry " + std::to_string(index) + " (" +
                              e.video_id + "): non-positive duration");
      if (!(e.tau_s >= 0.0 && e.tau_s < e.tau_e && e.tau_e <= e.duration))
        throw ValidationError(
            "manifest entry " + std::to_string(index) + " (" + e.video_id +
            "/" + e.query_id + "): annotation [" + std::to_string(e.tau_s) +
            ", " + std::to_string(e.tau_e) + "] outside video duration " +
            std::to_string(e.duration));
      m.entries.push_back(std::move(e));
    } else {
      throw ValidationError("manifest line " + std::to_string(lineno) +
                            ": unknown record type '" + type + "'");
    }
  }
  if (!header_seen)
    throw ValidationError("manifest " + path.string() + ": missing header record");
  if (m.entries.empty())
    throw ValidationError("manifest " + path.string() + ": no entries");
  return m;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write manifest " + path.string());
  out << json{{"type", "manifest"}, {"split", m.split_name}}.dump() << "\n";
  for (const auto& e : m.entries) {
    // features_path is written verbatim; keep it relative to the manifest
    json j{{"type", "entry"},
           {"video_id", e.video_id},
           {"features", e.features_path},
           {"duration", e.duration},
           {"query_id", e.query_id},
           {"query", e.query_text},
           {"tau_s", e.tau_s},
           {"tau_e", e.tau_e}};
    if (e.periods) {
      json ps = json::array();
      for (const auto& p : *e.periods) ps.push_back({p.t_start, p.t_end});
      j["periods"] = ps;
    }
    out << j.dump() << "\n";
  }
}

namespace {
constexpr char kMagic[4] = {'V', 'F', 'E', 'A'};

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}
}  // namespace

void write_feature_file(const std::filesystem::path& path, const nn::Mat& m,
                        bool as_f32) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write feature file " + path.string());
  out.write(kMagic, 4);
  write_pod<std::uint8_t>(out, as_f32 ? 0 : 1);
  write_pod<std::uint8_t>(out, 2);
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (as_f32)
        write_pod<float>(out, static_cast<float>(m(r, c)));
      else
        write_pod<double>(out, m(r, c));
    }
}

nn::Mat read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open feature file " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw ValidationError("feature file " + path.string() + ": bad magic");
  const auto dtype = read_pod<std::uint8_t>(in);
  const auto rank = read_pod<std::uint8_t>(in);
  if (dtype > 1 || rank != 2)
    throw ValidationError("feature file " + path.string() +
                          ": unsupported dtype/rank");
  const auto rows = read_pod<std::uint64_t>(in);
  const auto cols = read_pod<std::uint64_t>(in);
  nn::Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = dtype == 0 ? static_cast<double>(read_pod<float>(in))
                           : read_pod<double>(in);
  if (!in)
    throw ValidationError("feature file " + path.string() + ": truncated");
  return m;
}

}  // namespace vmr
