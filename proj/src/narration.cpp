#include "vmr/narration.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace vmr {

using nlohmann::json;

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open embedding table " + path.string());
  EmbeddingTable t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    std::vector<double> vals;
    double v;
    while (ss >> v) vals.push_back(v);
    if (vals.empty())
      throw ValidationError("embedding table line " + std::to_string(lineno) +
                            ": no values");
    if (t.dim_ == 0) t.dim_ = static_cast<int>(vals.size());
    if (static_cast<int>(vals.size()) != t.dim_)
      throw ValidationError("embedding table line " + std::to_string(lineno) +
                            ": inconsistent dimension");
    Eigen::VectorXd e(t.dim_);
    for (int i = 0; i < t.dim_; ++i) e(i) = vals[i];
    t.table_[word] = std::move(e);
  }
  if (t.table_.empty())
    throw ValidationError("embedding table " + path.string() + " is empty");
  return t;
}

void EmbeddingTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write embedding table " + path.string());
  out.precision(17);
  for (const auto& [word, vec] : table_) {
    out << word;
    for (Eigen::Index i = 0; i < vec.size(); ++i) out << ' ' << vec(i);
    out << '\n';
  }
}

void EmbeddingTable::insert(const std::string& word, const Eigen::VectorXd& v) {
  if (dim_ == 0) dim_ = static_cast<int>(v.size());
  if (v.size() != dim_) throw ValidationError("embedding dim mismatch");
  table_[word] = v;
}

Eigen::VectorXd EmbeddingTable::lookup(const std::string& word) const {
  auto it = table_.find(word);
  if (it == table_.end()) return Eigen::VectorXd::Zero(dim_);
  return it->second;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

Eigen::VectorXd embed_sentence(const std::string& text,
                               const EmbeddingTable& table) {
  const auto tokens = tokenize(text);
  if (tokens.empty())
    throw ValidationError("embed_sentence: no tokens in '" + text + "'");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(table.dim());
  for (const auto& tok : tokens) sum += table.lookup(tok);
  return sum / static_cast<double>(tokens.size());
}

Query embed_query(const std::string& query_id, const std::string& text,
                  const EmbeddingTable& table) {
  Query q;
  q.query_id = query_id;
  q.tokens = tokenize(text);
  if (q.tokens.empty())
    throw ValidationError("query " + query_id + ": no tokens");
  q.embeddings = nn::Mat::Zero(q.tokens.size(), table.dim());
  q.mask.assign(q.tokens.size(), 1);
  for (std::size_t i = 0; i < q.tokens.size(); ++i)
    q.embeddings.row(i) = table.lookup(q.tokens[i]).transpose();
  return q;
}

std::vector<double> sample_frame_timestamps(double duration, double interval) {
  if (duration <= 0.0 || interval <= 0.0)
    throw ValidationError("sample_frame_timestamps: non-positive input");
  std::vector<double> out;
  for (double t = interval / 2.0; t < duration; t += interval) out.push_back(t);
  if (out.empty()) out.push_back(duration / 2.0);
  return out;
}

FixtureNarratorClient::FixtureNarratorClient(
    const std::filesystem::path& fixture_file) {
  std::ifstream in(fixture_file);
  if (!in)
    throw ValidationError("cannot open fixture file " + fixture_file.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError("fixture line " + std::to_string(lineno) + ": " +
                            e.what());
    }
    captions_[frame_image_ref(j.at("video_id").get<std::string>(),
                              j.at("t").get<double>())] =
        j.at("text").get<std::string>();
  }
}

std::string FixtureNarratorClient::caption(const std::string& image_ref,
                                           const std::string& prompt) {
  (void)prompt;
  ++calls_;
  auto it = captions_.find(image_ref);
  if (it == captions_.end())
    throw std::runtime_error("no fixture caption for " + image_ref);
  return it->second;
}

RemoteNarratorClient::RemoteNarratorClient(std::string host, int port,
                                           std::string path, int max_attempts,
                                           int backoff_ms,
                                           std::string bearer_token)
    : host_(std::move(host)),
      port_(port),
      path_(std::move(path)),
      max_attempts_(max_attempts),
      backoff_ms_(backoff_ms),
      token_(std::move(bearer_token)) {}

std::string RemoteNarratorClient::identity() const {
  return "remote:" + host_ + ":" + std::to_string(port_) + path_;
}

std::string RemoteNarratorClient::caption(const std::string& image_ref,
                                          const std::string& prompt) {
  const json body{{"image_ref", image_ref}, {"prompt", prompt}};
  std::string last_error;
  for (int attempt = 0; attempt < max_attempts_; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(backoff_ms_ << (attempt - 1)));
    }
    httplib::Client cli(host_, port_);
    cli.set_connection_timeout(10);
    cli.set_read_timeout(120);
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
    auto res = cli.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "transport error " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "status " + std::to_string(res->status);
      continue;
    }
    try {
      return json::parse(res->body).at("text").get<std::string>();
    } catch (const json::exception& e) {
      last_error = std::string("bad response body: ") + e.what();
    }
  }
  throw std::runtime_error("narrator endpoint failed after " +
                           std::to_string(max_attempts_) +
                           " attempts: " + last_error);
}

std::string frame_image_ref(const std::string& video_id, double t) {
  std::ostringstream ss;
  ss << video_id << "#t=" << t;
  return ss.str();
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {
std::string sanitize_id(const std::string& id) {
  std::string out;
  for (char c : id)
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

std::string prompt_hash_hex(const std::string& prompt) {
  std::ostringstream ss;
  ss << std::hex << fnv1a64(prompt);
  return ss.str();
}
}  // namespace

std::filesystem::path narration_cache_file(
    const std::filesystem::path& cache_dir, const std::string& video_id) {
  return cache_dir / (sanitize_id(video_id) + ".jsonl");
}

std::map<double, std::string> load_narration_cache(
    const std::filesystem::path& cache_dir, const std::string& video_id,
    const std::string& prompt) {
  std::map<double, std::string> out;
  const auto file = narration_cache_file(cache_dir, video_id);
  std::ifstream in(file);
  if (!in) return out;
  const std::string want_hash = prompt_hash_hex(prompt);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw ValidationError("corrupt narration cache " + file.string());
    }
    if (j.value("prompt_fnv", "") != want_hash) continue;
    out[j.at("t").get<double>()] = j.at("text").get<std::string>();
  }
  return out;
}

std::vector<NarrativeEntry> narrate(const std::string& video_id,
                                    const std::vector<double>& timestamps,
                                    NarratorClient& client,
                                    const std::filesystem::path& cache_dir,
                                    const std::string& prompt, int parallelism,
                                    NarrateStats* stats) {
  std::filesystem::create_directories(cache_dir);
  auto cached = load_narration_cache(cache_dir, video_id, prompt);

  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < timestamps.size(); ++i)
    if (!cached.count(timestamps[i])) missing.push_back(i);
  if (stats) {
    stats->hits += static_cast<int>(timestamps.size() - missing.size());
    stats->misses += static_cast<int>(missing.size());
  }

  std::vector<std::string> fetched(timestamps.size());
  std::vector<std::uint8_t> ok(timestamps.size(), 0);
  std::vector<std::string> errors(timestamps.size());

  if (!missing.size()) {
    // warm cache: zero client calls
  } else {
    const int workers =
        std::max(1, std::min<int>(parallelism, static_cast<int>(missing.size())));
    std::mutex mu;
    std::size_t next = 0;
    auto worker = [&] {
      for (;;) {
        std::size_t k;
        {
          std::lock_guard<std::mutex> lk(mu);
          if (next >= missing.size()) return;
          k = next++;
        }
        const std::size_t idx = missing[k];
        try {
          fetched[idx] =
              client.caption(frame_image_ref(video_id, timestamps[idx]), prompt);
          ok[idx] = 1;
        } catch (const std::exception& e) {
          errors[idx] = e.what();
        }
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    // single writer: append the new captions sorted by timestamp
    std::vector<std::size_t> succeeded;
    for (std::size_t idx : missing)
      if (ok[idx]) succeeded.push_back(idx);
    std::sort(succeeded.begin(), succeeded.end(),
              [&](std::size_t a, std::size_t b) {
                return timestamps[a] < timestamps[b];
              });
    if (!succeeded.empty()) {
      std::ofstream out(narration_cache_file(cache_dir, video_id),
                        std::ios::app);
      if (!out)
        throw ValidationError("cannot write narration cache for " + video_id);
      const std::string ph = prompt_hash_hex(prompt);
      for (std::size_t idx : succeeded) {
        out << json{{"t", timestamps[idx]},
                    {"prompt_fnv", ph},
                    {"text", fetched[idx]}}
                   .dump()
            << "\n";
        cached[timestamps[idx]] = fetched[idx];
      }
    }

    for (std::size_t idx : missing) {
      if (!ok[idx]) {
        if (stats) ++stats->failures;
        throw NarrationError("narration failed for " + video_id + " at t=" +
                                 std::to_string(timestamps[idx]) + ": " +
                                 errors[idx],
                             timestamps[idx]);
      }
    }
  }

  std::vector<NarrativeEntry> out;
  out.reserve(timestamps.size());
  for (double t : timestamps) out.push_back({t, cached.at(t)});
  return out;
}

StructuredParagraph align_paragraph(const std::vector<NarrativeEntry>& entries,
                                    const VideoFeatureSequence& video,
                                    const EmbeddingTable& table) {
  if (entries.empty())
    throw ValidationError("align_paragraph: no narrative entries");
  const Eigen::Index L = video.snippets.rows();
  const int real = video.real_count();
  const int d = table.dim();

  StructuredParagraph p;
  p.entries = entries;
  // canonical order makes binning sums independent of input order
  std::sort(p.entries.begin(), p.entries.end(),
            [](const NarrativeEntry& a, const NarrativeEntry& b) {
              return a.timestamp != b.timestamp ? a.timestamp < b.timestamp
                                                : a.text < b.text;
            });
  p.aligned = nn::Mat::Zero(L, d);
  p.fill_flags.assign(L, 0);

  std::vector<int> counts(real, 0);
  for (const auto& e : p.entries) {
    const int bin = seconds_to_snippet_index(e.timestamp, video.periods);
    p.aligned.row(bin) += embed_sentence(e.text, table).transpose();
    counts[bin] += 1;
  }
  for (int k = 0; k < real; ++k) {
    if (counts[k] > 0) {
      p.aligned.row(k) /= counts[k];
      p.fill_flags[k] = 1;
    }
  }

  // forward-fill empty real bins; back-fill the leading ones
  int first_filled = -1;
  for (int k = 0; k < real; ++k)
    if (p.fill_flags[k]) {
      first_filled = k;
      break;
    }
  // entries are non-empty and in-range, so some bin is filled
  for (int k = 0; k < first_filled; ++k)
    p.aligned.row(k) = p.aligned.row(first_filled);
  for (int k = first_filled + 1; k < real; ++k)
    if (!p.fill_flags[k]) p.aligned.row(k) = p.aligned.row(k - 1);

  return p;
}

}  // namespace vmr
