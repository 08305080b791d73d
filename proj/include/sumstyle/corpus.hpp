#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "sumstyle/labeler.hpp"
#include "sumstyle/metrics.hpp"
#include "sumstyle/text.hpp"

namespace sumstyle {

// One JSONL corpus entry. `document` and `summary` accept either a raw string
// (run through the sentence splitter) or an array of pre-split sentence strings.
struct CorpusRecord {
    std::string id;
    Document doc;
    std::vector<Sentence> summary;
};

// Parse failure tied to a 1-based input line number.
class RecordError : public std::runtime_error {
  public:
    RecordError(long long line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    long long line() const { return line_; }

  private:
    long long line_;
};

CorpusRecord parse_record(const std::string& line, long long line_no);

// Flattened per-summary-sentence analysis row.
struct SentenceMetrics {
    std::string doc_id;
    int sentence_index = 0;  // 1-based position within the summary
    double fusion_index = 0.0;
    double recall = 0.0;
    double scatter = 0.0;
    int best_match_index = 0;
    std::array<double, 3> novel = {0.0, 0.0, 0.0};
    double coverage = 0.0;
    double density = 0.0;
};

std::vector<SentenceMetrics> analyze_record(const CorpusRecord& record, int k);

struct LabeledRecord {
    CorpusRecord record;
    LabeledPair pair;
};

struct StreamOptions {
    int k = 5;
    double gamma = 0.7;
    int chunk_size = 256;      // records held in memory at once
    bool skip_errors = false;  // skip bad lines instead of aborting on the first
};

struct StreamStats {
    long long lines = 0;    // physical lines consumed (including blank ones)
    long long records = 0;  // records processed successfully
    long long skipped = 0;  // bad lines skipped under skip_errors
};

using MetricsSink = std::function<void(const SentenceMetrics&)>;
using LabelSink = std::function<void(const LabeledRecord&)>;

// Chunked streaming drivers: read up to chunk_size records, process the chunk
// with an OpenMP parallel-for, then emit results in input order. Output is
// byte-identical for any worker count (set via OMP_NUM_THREADS). Memory stays
// bounded by the chunk, not the corpus. Without skip_errors the first bad line
// (in input order) raises RecordError.
StreamStats analyze_stream(std::istream& in, const StreamOptions& opt,
                           const MetricsSink& sink);
StreamStats label_stream(std::istream& in, const StreamOptions& opt,
                         const LabelSink& sink);

// Single-threaded reference twins with identical observable behavior; the
// parallel drivers are tested against these.
StreamStats analyze_stream_serial(std::istream& in, const StreamOptions& opt,
                                  const MetricsSink& sink);
StreamStats label_stream_serial(std::istream& in, const StreamOptions& opt,
                                const LabelSink& sink);

}  // namespace sumstyle
