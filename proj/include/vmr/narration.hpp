#pragma once

#include "vmr/datamodel.hpp"
#include "vmr/errors.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace vmr {

// Frozen word-embedding table shared by the query and narrative paths.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(int dim) : dim_(dim) {}

  static EmbeddingTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  void insert(const std::string& word, const Eigen::VectorXd& v);
  // Zero vector for out-of-vocabulary words.
  Eigen::VectorXd lookup(const std::string& word) const;
  bool contains(const std::string& word) const { return table_.count(word) > 0; }
  int dim() const { return dim_; }
  std::size_t size() const { return table_.size(); }

 private:
  int dim_ = 0;
  std::map<std::string, Eigen::VectorXd> table_;
};

// Lowercased alphanumeric tokens.
std::vector<std::string> tokenize(const std::string& text);

// Mean of word embeddings; OOV tokens contribute zero vectors but still
// count in the denominator.
Eigen::VectorXd embed_sentence(const std::string& text,
                               const EmbeddingTable& table);

Query embed_query(const std::string& query_id, const std::string& text,
                  const EmbeddingTable& table);

struct NarrativeEntry {
  double timestamp = 0.0;
  std::string text;
};

struct StructuredParagraph {
  std::vector<NarrativeEntry> entries;  // sorted by timestamp
  nn::Mat aligned;                      // [L x d_c]
  nn::Mask fill_flags;                  // true = bin had >= 1 narrative
};

// Bin centers: interval/2, 3*interval/2, ... up to duration. A video
// shorter than one interval gets a single midpoint frame.
std::vector<double> sample_frame_timestamps(double duration, double interval);

inline const char* kDefaultNarratorPrompt =
    "This is one image frame sampled from a video. Please caption this frame "
    "in two or three sentences, to describe this frame with some details but "
    "without any analysis.";

class NarratorClient {
 public:
  virtual ~NarratorClient() = default;
  // image_ref names the frame ("<video_id>#t=<seconds>"); throws on failure.
  // Must be callable from multiple threads.
  virtual std::string caption(const std::string& image_ref,
                              const std::string& prompt) = 0;
  virtual std::string identity() const = 0;
};

// Deterministic offline client backed by a JSONL fixture file with
// records {"video_id":..., "t":..., "text":...}.
class FixtureNarratorClient : public NarratorClient {
 public:
  explicit FixtureNarratorClient(const std::filesystem::path& fixture_file);
  std::string caption(const std::string& image_ref,
                      const std::string& prompt) override;
  std::string identity() const override { return "fixture"; }
  int calls() const { return calls_.load(); }

 private:
  std::map<std::string, std::string> captions_;
  std::atomic<int> calls_{0};
};

// Remote captioning endpoint: POST {image_ref, prompt} -> {text}, with
// bounded retries and exponential backoff.
class RemoteNarratorClient : public NarratorClient {
 public:
  RemoteNarratorClient(std::string host, int port,
                       std::string path = "/caption", int max_attempts = 3,
                       int backoff_ms = 100, std::string bearer_token = "");
  std::string caption(const std::string& image_ref,
                      const std::string& prompt) override;
  std::string identity() const override;

 private:
  std::string host_;
  int port_;
  std::string path_;
  int max_attempts_;
  int backoff_ms_;
  std::string token_;
};

std::string frame_image_ref(const std::string& video_id, double t);
std::uint64_t fnv1a64(const std::string& s);

struct NarrateStats {
  int hits = 0;
  int misses = 0;
  int failures = 0;
};

// One entry per timestamp, served from the per-video cache file when the
// (timestamp, prompt) pair is already present. New captions are appended
// to the cache sorted by timestamp; on any client failure the successes
// are still cached before a NarrationError is thrown.
std::vector<NarrativeEntry> narrate(
    const std::string& video_id, const std::vector<double>& timestamps,
    NarratorClient& client, const std::filesystem::path& cache_dir,
    const std::string& prompt = kDefaultNarratorPrompt, int parallelism = 4,
    NarrateStats* stats = nullptr);

std::filesystem::path narration_cache_file(
    const std::filesystem::path& cache_dir, const std::string& video_id);

// Cached records for a video: timestamp -> text, restricted to the prompt.
std::map<double, std::string> load_narration_cache(
    const std::filesystem::path& cache_dir, const std::string& video_id,
    const std::string& prompt = kDefaultNarratorPrompt);

// Mean-pool sentence embeddings of the entries falling in each snippet
// period; empty real bins are forward-filled (leading ones back-filled
// from the first occupied bin); padded bins stay zero.
StructuredParagraph align_paragraph(const std::vector<NarrativeEntry>& entries,
                                    const VideoFeatureSequence& video,
                                    const EmbeddingTable& table);

}  // namespace vmr
