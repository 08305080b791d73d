#include "sumstyle/corpus.hpp"

#include <algorithm>
#include <istream>
#include <utility>

#include <json.hpp>

namespace sumstyle {

namespace {

using nlohmann::json;

bool is_blank(const std::string& line) {
    return std::all_of(line.begin(), line.end(), [](unsigned char c) {
        return std::isspace(c) != 0;
    });
}

// Accepts a raw string (sentence-split) or an array of sentence strings.
std::vector<Sentence> read_text_field(const json& value, const char* field) {
    std::vector<Sentence> out;
    if (value.is_string()) {
        out = split_sentences(value.get<std::string>());
    } else if (value.is_array()) {
        for (const json& item : value) {
            if (!item.is_string())
                throw std::runtime_error(std::string(field) +
                                         ": array entries must be strings");
            std::vector<Token> tokens = tokenize(item.get<std::string>());
            if (tokens.empty()) continue;  // whitespace-only sentence entries are dropped
            out.push_back(make_sentence(std::move(tokens), static_cast<int>(out.size()) + 1));
        }
    } else {
        throw std::runtime_error(std::string(field) +
                                 ": expected a string or an array of strings");
    }
    if (out.empty()) throw std::runtime_error(std::string(field) + ": no sentences");
    return out;
}

// Throws std::runtime_error with a bare message; callers attach line numbers.
CorpusRecord parse_record_raw(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::runtime_error("record must be a JSON object");
    if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty())
        throw std::runtime_error("missing or empty \"id\"");
    if (!j.contains("document")) throw std::runtime_error("missing \"document\"");
    if (!j.contains("summary")) throw std::runtime_error("missing \"summary\"");

    CorpusRecord record;
    record.id = j["id"].get<std::string>();
    record.doc.id = record.id;
    record.doc.sentences = read_text_field(j["document"], "document");
    record.summary = read_text_field(j["summary"], "summary");
    return record;
}

}  // namespace

CorpusRecord parse_record(const std::string& line, long long line_no) {
    try {
        return parse_record_raw(line);
    } catch (const std::exception& e) {
        throw RecordError(line_no, e.what());
    }
}

std::vector<SentenceMetrics> analyze_record(const CorpusRecord& record, int k) {
    std::vector<SentenceMetrics> rows;
    rows.reserve(record.summary.size());
    for (std::size_t i = 0; i < record.summary.size(); ++i) {
        const Sentence& s = record.summary[i];
        SentenceMetrics row;
        row.doc_id = record.id;
        row.sentence_index = static_cast<int>(i) + 1;
        FusionScores f = fusion_index(s, record.doc, k);
        row.fusion_index = f.fusion_index;
        row.recall = f.recall;
        row.scatter = f.scatter;
        row.best_match_index = f.best_match_index;
        row.novel = novel_ngram_fraction(s, record.doc).novel;
        ExtractiveFragmentStats frag = extractive_fragments(s, record.doc);
        row.coverage = frag.coverage;
        row.density = frag.density;
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

// Shared chunk loop: Work maps a parsed record to Out, Emit consumes Out in
// input order. Results of a chunk are computed in parallel into fixed slots,
// then drained sequentially, so any OMP_NUM_THREADS yields identical output.
template <typename Out, typename Work, typename Emit>
StreamStats run_chunked(std::istream& in, const StreamOptions& opt, Work work,
                        Emit emit) {
    if (opt.chunk_size < 1) throw std::invalid_argument("chunk_size must be >= 1");

    StreamStats stats;
    std::string line;
    long long line_no = 0;
    bool eof = false;
    std::vector<std::pair<long long, std::string>> chunk;
    chunk.reserve(opt.chunk_size);

    while (!eof) {
        chunk.clear();
        while (static_cast<int>(chunk.size()) < opt.chunk_size) {
            if (!std::getline(in, line)) {
                eof = true;
                break;
            }
            ++line_no;
            ++stats.lines;
            if (is_blank(line)) continue;
            chunk.emplace_back(line_no, std::move(line));
        }
        if (chunk.empty()) continue;

        std::vector<Out> outs(chunk.size());
        std::vector<std::string> errors(chunk.size());
        std::vector<char> failed(chunk.size(), 0);

        const int n = static_cast<int>(chunk.size());
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < n; ++i) {
            try {
                outs[i] = work(parse_record_raw(chunk[i].second));
            } catch (const std::exception& e) {
                failed[i] = 1;
                errors[i] = e.what();
            }
        }

        for (int i = 0; i < n; ++i) {
            if (failed[i]) {
                if (!opt.skip_errors) throw RecordError(chunk[i].first, errors[i]);
                ++stats.skipped;
                continue;
            }
            ++stats.records;
            emit(outs[i]);
        }
    }
    return stats;
}

// The serial twins restate the contract as a plain loop: one line in, one
// result out, first error aborts unless skipped.
template <typename HandleRecord>
StreamStats run_serial(std::istream& in, const StreamOptions& opt, HandleRecord handle) {
    StreamStats stats;
    std::string line;
    long long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        ++stats.lines;
        if (is_blank(line)) continue;
        try {
            handle(parse_record_raw(line));
        } catch (const std::exception& e) {
            if (!opt.skip_errors) throw RecordError(line_no, e.what());
            ++stats.skipped;
            continue;
        }
        ++stats.records;
    }
    return stats;
}

}  // namespace

StreamStats analyze_stream(std::istream& in, const StreamOptions& opt,
                           const MetricsSink& sink) {
    return run_chunked<std::vector<SentenceMetrics>>(
        in, opt, [&](const CorpusRecord& r) { return analyze_record(r, opt.k); },
        [&](const std::vector<SentenceMetrics>& rows) {
            for (const SentenceMetrics& row : rows) sink(row);
        });
}

StreamStats label_stream(std::istream& in, const StreamOptions& opt,
                         const LabelSink& sink) {
    OracleConfig cfg;
    cfg.k = opt.k;
    cfg.gamma = opt.gamma;
    return run_chunked<LabeledRecord>(
        in, opt,
        [&](const CorpusRecord& r) {
            return LabeledRecord{r, label_pair(r.doc, r.summary, cfg)};
        },
        [&](const LabeledRecord& rec) { sink(rec); });
}

StreamStats analyze_stream_serial(std::istream& in, const StreamOptions& opt,
                                  const MetricsSink& sink) {
    return run_serial(in, opt, [&](const CorpusRecord& r) {
        for (const SentenceMetrics& row : analyze_record(r, opt.k)) sink(row);
    });
}

StreamStats label_stream_serial(std::istream& in, const StreamOptions& opt,
                                const LabelSink& sink) {
    OracleConfig cfg;
    cfg.k = opt.k;
    cfg.gamma = opt.gamma;
    return run_serial(in, opt, [&](const CorpusRecord& r) {
        sink(LabeledRecord{r, label_pair(r.doc, r.summary, cfg)});
    });
}

}  // namespace sumstyle
