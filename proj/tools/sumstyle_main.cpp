#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sumstyle/corpus.hpp"
#include "sumstyle/labeler.hpp"
#include "sumstyle/metrics.hpp"
#include "sumstyle/model/checkpoint.hpp"
#include "sumstyle/model/infer.hpp"
#include "sumstyle/model/synthetic.hpp"
#include "sumstyle/model/train.hpp"

using json = nlohmann::ordered_json;
using namespace sumstyle;

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

std::string fmt(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string join_tokens(const std::vector<Token>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    return out;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return in;
}

class ManifestWriter {
  public:
    ManifestWriter(std::string command, json config)
        : start_(std::chrono::steady_clock::now()),
          manifest_{{"command", std::move(command)},
                    {"version", kVersion},
                    {"config", std::move(config)},
                    {"inputs", json::array()},
                    {"outputs", json::array()}} {}

    void add_input(const std::string& path) { manifest_["inputs"].push_back(path); }
    void add_output(const std::string& path) { manifest_["outputs"].push_back(path); }
    void note(const std::string& key, json value) { manifest_[key] = std::move(value); }

    // Written beside the primary output as <output>.manifest.json.
    void write() {
        double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
                .count();
        manifest_["wall_clock_seconds"] = seconds;
        std::string path =
            std::string(manifest_["outputs"].empty()
                            ? "run"
                            : manifest_["outputs"][0].get<std::string>()) +
            ".manifest.json";
        std::ofstream out = open_output(path);
        out << manifest_.dump(2) << "\n";
    }

  private:
    std::chrono::steady_clock::time_point start_;
    json manifest_;
};

std::string derive_summary_path(const std::string& metrics_path) {
    std::filesystem::path p(metrics_path);
    std::filesystem::path stem = p.parent_path() / p.stem();
    return stem.string() + "_summary" + (p.has_extension() ? p.extension().string() : ".csv");
}

void fold_stats(StyleStats& agg, const LabeledPair& pair) {
    StyleStats one = corpus_stats({pair});
    agg.ext_count += one.ext_count;
    agg.abs_count += one.abs_count;
    for (std::size_t b = 0; b < agg.position_counts.size(); ++b) {
        agg.position_counts[b][0] += one.position_counts[b][0];
        agg.position_counts[b][1] += one.position_counts[b][1];
    }
    for (int f = 0; f < 2; ++f)
        for (int t = 0; t < 2; ++t)
            agg.transition_counts[f][t] += one.transition_counts[f][t];
}

void print_style_stats(const StyleStats& stats) {
    std::cout << "sentences: " << stats.sentence_count() << " (ext "
              << fmt(stats.ext_fraction()) << ", abs " << fmt(stats.abs_fraction())
              << ")\n";
    auto tf = stats.transition_fractions();
    std::cout << "transitions: ext->ext " << fmt(tf[0][0]) << ", ext->abs "
              << fmt(tf[0][1]) << ", abs->ext " << fmt(tf[1][0]) << ", abs->abs "
              << fmt(tf[1][1]) << "\n";
}

void write_position_csv(const std::string& path, const StyleStats& stats) {
    std::ofstream out = open_output(path);
    out << "position,ext,abs\n";
    for (std::size_t b = 0; b < stats.position_counts.size(); ++b) {
        std::string label = b < kPositionBuckets ? std::to_string(b + 1)
                                                 : std::to_string(kPositionBuckets) + "+";
        out << label << "," << stats.position_counts[b][0] << ","
            << stats.position_counts[b][1] << "\n";
    }
}

void write_transition_csv(const std::string& path, const StyleStats& stats) {
    std::ofstream out = open_output(path);
    out << "from,to,count,fraction\n";
    const char* names[2] = {"ext", "abs"};
    auto tf = stats.transition_fractions();
    for (int f = 0; f < 2; ++f)
        for (int t = 0; t < 2; ++t)
            out << names[f] << "," << names[t] << "," << stats.transition_counts[f][t]
                << "," << fmt(tf[f][t]) << "\n";
}

// ---------------------------------------------------------------- analyze --

struct AnalyzeOpts {
    std::string input;
    std::string output = "metrics.csv";
    std::string aggregate;  // derived from output when empty
    int k = 5;
    int chunk_size = 256;
    bool skip_errors = false;
};

int run_analyze(const AnalyzeOpts& opt) {
    std::string aggregate_path =
        opt.aggregate.empty() ? derive_summary_path(opt.output) : opt.aggregate;
    ManifestWriter manifest("analyze", json{{"k", opt.k},
                                            {"chunk_size", opt.chunk_size},
                                            {"skip_errors", opt.skip_errors}});
    manifest.add_input(opt.input);
    manifest.add_output(opt.output);
    manifest.add_output(aggregate_path);

    std::ifstream in = open_input(opt.input);
    std::ofstream out = open_output(opt.output);
    out << "doc_id,sentence_index,fusion_index,recall,scatter,best_match,"
           "novel1,novel2,novel3,coverage,density\n";

    long long sentences = 0;
    double sum_fi = 0, sum_rc = 0, sum_sc = 0, sum_cov = 0, sum_den = 0;
    double sum_novel[3] = {0, 0, 0};
    long long fi_hist[10] = {0};

    StreamOptions stream;
    stream.k = opt.k;
    stream.chunk_size = opt.chunk_size;
    stream.skip_errors = opt.skip_errors;
    StreamStats stats = analyze_stream(in, stream, [&](const SentenceMetrics& row) {
        out << row.doc_id << "," << row.sentence_index << "," << fmt(row.fusion_index)
            << "," << fmt(row.recall) << "," << fmt(row.scatter) << ","
            << row.best_match_index << "," << fmt(row.novel[0]) << ","
            << fmt(row.novel[1]) << "," << fmt(row.novel[2]) << ","
            << fmt(row.coverage) << "," << fmt(row.density) << "\n";
        ++sentences;
        sum_fi += row.fusion_index;
        sum_rc += row.recall;
        sum_sc += row.scatter;
        sum_cov += row.coverage;
        sum_den += row.density;
        for (int n = 0; n < 3; ++n) sum_novel[n] += row.novel[n];
        int bin = std::min(9, static_cast<int>(row.fusion_index * 10.0));
        ++fi_hist[bin];
    });

    if (stats.records == 0) throw std::runtime_error("no records in " + opt.input);

    std::ofstream agg = open_output(aggregate_path);
    agg << "metric,value\n";
    agg << "records," << stats.records << "\n";
    agg << "sentences," << sentences << "\n";
    agg << "skipped_lines," << stats.skipped << "\n";
    double n = static_cast<double>(sentences);
    agg << "mean_fusion_index," << fmt(sum_fi / n) << "\n";
    agg << "mean_recall," << fmt(sum_rc / n) << "\n";
    agg << "mean_scatter," << fmt(sum_sc / n) << "\n";
    agg << "mean_novel1," << fmt(sum_novel[0] / n) << "\n";
    agg << "mean_novel2," << fmt(sum_novel[1] / n) << "\n";
    agg << "mean_novel3," << fmt(sum_novel[2] / n) << "\n";
    agg << "mean_coverage," << fmt(sum_cov / n) << "\n";
    agg << "mean_density," << fmt(sum_den / n) << "\n";
    for (int b = 0; b < 10; ++b) {
        agg << "fi_bin_" << fmt(b / 10.0) << "-" << fmt((b + 1) / 10.0) << ","
            << fi_hist[b] << "\n";
    }

    std::cout << "analyzed " << stats.records << " records, " << sentences
              << " summary sentences";
    if (stats.skipped > 0) std::cout << " (skipped " << stats.skipped << " bad lines)";
    std::cout << "\n";
    manifest.note("records", stats.records);
    manifest.write();
    return kExitOk;
}

// ------------------------------------------------------------------ label --

struct LabelOpts {
    std::string input;
    std::string output = "labels.jsonl";
    int k = 5;
    double gamma = 0.7;
    int chunk_size = 256;
    bool skip_errors = false;
};

json label_record_json(const LabeledRecord& rec) {
    json line;
    line["id"] = rec.record.id;
    json doc = json::array();
    for (const Sentence& s : rec.record.doc.sentences) doc.push_back(join_tokens(s.tokens));
    line["document"] = std::move(doc);
    json sum = json::array();
    for (const Sentence& s : rec.record.summary) sum.push_back(join_tokens(s.tokens));
    line["summary"] = std::move(sum);
    json labels = json::array();
    for (const LabeledSentence& ls : rec.pair.summary) {
        json entry;
        entry["style"] = ls.label.kind == StyleKind::Ext ? "ext" : "abs";
        if (ls.label.kind == StyleKind::Ext)
            entry["source"] = ls.label.source_index;
        else
            entry["source"] = nullptr;
        entry["fusion_index"] = ls.scores.fusion_index;
        entry["recall"] = ls.scores.recall;
        entry["scatter"] = ls.scores.scatter;
        labels.push_back(std::move(entry));
    }
    line["labels"] = std::move(labels);
    return line;
}

int run_label(const LabelOpts& opt) {
    ManifestWriter manifest("label", json{{"k", opt.k},
                                          {"gamma", opt.gamma},
                                          {"chunk_size", opt.chunk_size},
                                          {"skip_errors", opt.skip_errors}});
    manifest.add_input(opt.input);
    manifest.add_output(opt.output);

    std::ifstream in = open_input(opt.input);
    std::ofstream out = open_output(opt.output);

    StyleStats agg;
    StreamOptions stream;
    stream.k = opt.k;
    stream.gamma = opt.gamma;
    stream.chunk_size = opt.chunk_size;
    stream.skip_errors = opt.skip_errors;
    StreamStats stats = label_stream(in, stream, [&](const LabeledRecord& rec) {
        out << label_record_json(rec).dump() << "\n";
        fold_stats(agg, rec.pair);
    });

    if (stats.records == 0) throw std::runtime_error("no records in " + opt.input);

    std::cout << "labeled " << stats.records << " records\n";
    print_style_stats(agg);
    manifest.note("records", stats.records);
    manifest.note("ext_fraction", agg.ext_fraction());
    manifest.write();
    return kExitOk;
}

// ------------------------------------------------------------------- tune --

struct TuneOpts {
    std::string annotations;
    std::string corpus;
    std::string output = "tuning.csv";
    std::vector<int> k_candidates = {2, 3, 5, 8};
    std::vector<double> gamma_candidates = {0.5, 0.6, 0.7, 0.8};
    int k = 5;
};

struct Annotation {
    std::string doc_id;
    int sentence_index = 0;  // 1-based within the summary
    double human_fusion_degree = 0.0;
    std::optional<StyleKind> style;
};

std::vector<Annotation> read_annotations(const std::string& path) {
    std::ifstream in = open_input(path);
    std::vector<Annotation> out;
    std::string line;
    long long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw RecordError(line_no, std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object() || !j.contains("doc_id") || !j.contains("sentence_index") ||
            !j.contains("human_fusion_degree"))
            throw RecordError(line_no,
                              "annotation needs doc_id, sentence_index, human_fusion_degree");
        Annotation a;
        a.doc_id = j["doc_id"].get<std::string>();
        a.sentence_index = j["sentence_index"].get<int>();
        a.human_fusion_degree = j["human_fusion_degree"].get<double>();
        if (j.contains("style") && !j["style"].is_null()) {
            std::string s = j["style"].get<std::string>();
            if (s != "ext" && s != "abs")
                throw RecordError(line_no, "style must be \"ext\" or \"abs\"");
            a.style = s == "ext" ? StyleKind::Ext : StyleKind::Abs;
        }
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<CorpusRecord> read_corpus(const std::string& path) {
    std::ifstream in = open_input(path);
    std::vector<CorpusRecord> out;
    std::string line;
    long long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(parse_record(line, line_no));
    }
    return out;
}

int run_tune(const TuneOpts& opt) {
    ManifestWriter manifest("tune", json{{"k", opt.k},
                                         {"k_candidates", opt.k_candidates},
                                         {"gamma_candidates", opt.gamma_candidates}});
    manifest.add_input(opt.annotations);
    manifest.add_input(opt.corpus);
    manifest.add_output(opt.output);

    std::vector<CorpusRecord> corpus = read_corpus(opt.corpus);
    std::map<std::string, const CorpusRecord*> by_id;
    for (const CorpusRecord& r : corpus) by_id[r.id] = &r;

    std::vector<Annotation> annotations = read_annotations(opt.annotations);
    std::vector<std::string> offenders;
    std::vector<AnnotatedSentence> annotated;
    std::vector<std::pair<double, StyleKind>> fi_with_human;
    for (const Annotation& a : annotations) {
        auto it = by_id.find(a.doc_id);
        if (it == by_id.end() || a.sentence_index < 1 ||
            a.sentence_index > static_cast<int>(it->second->summary.size())) {
            offenders.push_back(a.doc_id + "#" + std::to_string(a.sentence_index));
            continue;
        }
        const Sentence& sentence = it->second->summary[a.sentence_index - 1];
        annotated.push_back(AnnotatedSentence{sentence, a.doc_id, a.human_fusion_degree});
        if (a.style) {
            double fi = fusion_index(sentence, it->second->doc, opt.k).fusion_index;
            fi_with_human.emplace_back(fi, *a.style);
        }
    }
    if (!offenders.empty()) {
        std::string msg = "annotations reference missing sentences:";
        for (const std::string& o : offenders) msg += " " + o;
        throw std::runtime_error(msg);
    }
    if (annotated.empty()) throw std::runtime_error("no annotations in " + opt.annotations);

    std::vector<Document> docs;
    for (const CorpusRecord& r : corpus) docs.push_back(r.doc);

    KTuneResult ks = tune_k(annotated, docs, opt.k_candidates);
    std::ofstream out = open_output(opt.output);
    out << "parameter,candidate,score,best\n";
    for (const auto& [k, corr] : ks.correlation_per_k)
        out << "k," << k << "," << fmt(corr) << "," << (k == ks.best_k ? "*" : "")
            << "\n";

    if (!fi_with_human.empty()) {
        GammaTuneResult gs = tune_gamma(fi_with_human, opt.gamma_candidates);
        for (const auto& [gamma, acc] : gs.accuracy_per_gamma)
            out << "gamma," << fmt(gamma) << "," << fmt(acc) << ","
                << (gamma == gs.best_gamma ? "*" : "") << "\n";
        std::cout << "best gamma: " << fmt(gs.best_gamma) << "\n";
        manifest.note("best_gamma", gs.best_gamma);
    }
    std::cout << "best k: " << ks.best_k << "\n";
    manifest.note("best_k", ks.best_k);
    manifest.write();
    return kExitOk;
}

// -------------------------------------------------------------- toy-train --

struct TrainOpts {
    std::string corpus;
    int synthetic = 0;
    double style_mix = 0.5;
    unsigned long long corpus_seed = 1;
    std::string dump_corpus;
    int k = 5;
    double gamma = 0.7;

    int d_model = 64;
    int heads = 4;
    int layers = 2;
    int ffn = 128;
    int max_positions = 0;  // 0 = sized from the data
    unsigned long long model_seed = 1;

    TrainConfig train;

    std::string checkpoint = "model.ckpt";
    std::string log = "train_log.csv";
};

struct TrainData {
    Vocab vocab;
    std::vector<LabeledPair> pairs;
};

TrainData load_train_data(const TrainOpts& opt) {
    if (opt.synthetic > 0) {
        SyntheticCorpus corpus =
            make_synthetic_corpus(opt.corpus_seed, opt.synthetic, opt.style_mix);
        return TrainData{std::move(corpus.vocab), std::move(corpus.pairs)};
    }

    std::vector<CorpusRecord> records = read_corpus(opt.corpus);
    if (records.empty()) throw std::runtime_error("no records in " + opt.corpus);

    std::vector<std::string> tokens;
    std::map<std::string, bool> seen;
    int max_sentences = 1;
    for (const CorpusRecord& r : records) {
        max_sentences = std::max(max_sentences, static_cast<int>(r.doc.sentences.size()));
        auto collect = [&](const Sentence& s) {
            for (const Token& t : s.tokens)
                if (!seen.count(t)) {
                    seen[t] = true;
                    tokens.push_back(t);
                }
        };
        for (const Sentence& s : r.doc.sentences) collect(s);
        for (const Sentence& s : r.summary) collect(s);
    }

    TrainData data{Vocab(tokens, max_sentences), {}};
    OracleConfig oracle{opt.k, opt.gamma};
    for (const CorpusRecord& r : records)
        data.pairs.push_back(label_pair(r.doc, r.summary, oracle));
    return data;
}

void dump_labeled_corpus(const std::string& path, const std::vector<LabeledPair>& pairs,
                         const std::string& id_prefix) {
    std::ofstream out = open_output(path);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        LabeledRecord rec;
        rec.pair = pairs[i];
        rec.record.id = pairs[i].doc.id.empty() ? id_prefix + std::to_string(i)
                                                : pairs[i].doc.id;
        rec.record.doc = pairs[i].doc;
        for (const LabeledSentence& ls : pairs[i].summary)
            rec.record.summary.push_back(ls.sentence);
        out << label_record_json(rec).dump() << "\n";
    }
}

int run_toy_train(const TrainOpts& opt) {
    json config{{"synthetic", opt.synthetic},
                {"style_mix", opt.style_mix},
                {"corpus_seed", opt.corpus_seed},
                {"k", opt.k},
                {"gamma", opt.gamma},
                {"d_model", opt.d_model},
                {"heads", opt.heads},
                {"layers", opt.layers},
                {"ffn", opt.ffn},
                {"max_positions", opt.max_positions},
                {"model_seed", opt.model_seed},
                {"lr", opt.train.lr},
                {"batch_size", opt.train.batch_size},
                {"kappa", opt.train.kappa},
                {"train_seed", opt.train.seed},
                {"pretrain_epochs", opt.train.pretrain_epochs},
                {"prefinetune_epochs", opt.train.prefinetune_epochs},
                {"joint_epochs", opt.train.joint_epochs}};
    ManifestWriter manifest("toy-train", std::move(config));
    if (!opt.corpus.empty()) manifest.add_input(opt.corpus);
    manifest.add_output(opt.checkpoint);
    manifest.add_output(opt.log);

    TrainData data = load_train_data(opt);
    if (!opt.dump_corpus.empty()) {
        dump_labeled_corpus(opt.dump_corpus, data.pairs, "syn");
        manifest.add_output(opt.dump_corpus);
    }

    ModelConfig cfg;
    cfg.vocab_size = data.vocab.size();
    cfg.d_model = opt.d_model;
    cfg.n_heads = opt.heads;
    cfg.n_layers = opt.layers;
    cfg.ffn_dim = opt.ffn;
    cfg.max_sentences = data.vocab.max_sentences();
    cfg.seed = opt.model_seed;
    if (opt.max_positions > 0) {
        cfg.max_positions = opt.max_positions;
    } else {
        std::size_t needed = 2;
        for (const LabeledPair& pair : data.pairs) {
            needed = std::max(needed, serialize_document(pair.doc, data.vocab).size());
            needed = std::max(needed, serialize_summary(pair, data.vocab).size() + 1);
        }
        cfg.max_positions = static_cast<int>(needed) + 2;
    }
    Model model(cfg);

    std::vector<ModelExample> copies;
    for (const LabeledPair& pair : data.pairs)
        for (const Sentence& s : pair.doc.sentences)
            copies.push_back(make_copy_example(s, data.vocab));
    std::vector<ModelExample> full;
    for (const LabeledPair& pair : data.pairs)
        full.push_back(make_example(pair, data.vocab));

    std::ofstream log = open_output(opt.log);
    log << "stage,epoch,token_loss,style_loss,total_loss,ident_norm,tag_norm\n";

    json skipped = json::array();
    struct StagePlan {
        TrainStage stage;
        const std::vector<ModelExample>* examples;
        int epochs;
    };
    StagePlan plan[3] = {
        {TrainStage::PretrainBase, &copies, opt.train.pretrain_epochs},
        {TrainStage::PreFinetune, &full, opt.train.prefinetune_epochs},
        {TrainStage::JointFinetune, &full, opt.train.joint_epochs},
    };

    std::mt19937_64 rng(opt.train.seed);
    try {
        for (const StagePlan& stage : plan) {
            if (stage.epochs == 0) {
                skipped.push_back(stage_name(stage.stage));
                continue;
            }
            for (int epoch = 1; epoch <= stage.epochs; ++epoch) {
                std::vector<EpochLog> rows =
                    train_stage(model, *stage.examples, stage.stage, 1, opt.train, rng);
                const EpochLog& row = rows.front();
                log << stage_name(stage.stage) << "," << epoch << ","
                    << fmt(row.token_loss) << "," << fmt(row.style_loss) << ","
                    << fmt(row.total_loss) << "," << fmt(row.ident_norm) << ","
                    << fmt(row.tag_norm) << "\n";
                log.flush();
            }
        }
    } catch (const TrainingError&) {
        manifest.note("stages_skipped", std::move(skipped));
        manifest.note("error", "training diverged; partial log preserved");
        manifest.write();
        throw;
    }

    save_checkpoint(model, data.vocab, opt.checkpoint);
    std::cout << "trained on " << data.pairs.size() << " pairs; checkpoint at "
              << opt.checkpoint << "\n";
    manifest.note("stages_skipped", std::move(skipped));
    manifest.note("pairs", data.pairs.size());
    manifest.write();
    return kExitOk;
}

// -------------------------------------------------------------- toy-infer --

struct InferOpts {
    std::string checkpoint;
    std::string corpus;
    std::string output = "generated.jsonl";
    std::string report;  // prefix for the report CSVs
    int max_output_tokens = 0;
    bool skip_errors = false;
};

int run_toy_infer(const InferOpts& opt) {
    ManifestWriter manifest("toy-infer", json{{"max_output_tokens", opt.max_output_tokens},
                                              {"skip_errors", opt.skip_errors}});
    manifest.add_input(opt.checkpoint);
    manifest.add_input(opt.corpus);
    manifest.add_output(opt.output);

    Checkpoint ckpt = load_checkpoint(opt.checkpoint);
    InferConfig infer_cfg;
    infer_cfg.max_output_tokens = opt.max_output_tokens;

    std::ifstream in = open_input(opt.corpus);
    std::ofstream out = open_output(opt.output);

    StyleStats agg;
    std::string line;
    long long line_no = 0, generated = 0, skipped = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            CorpusRecord record = parse_record(line, line_no);
            InferResult result = infer(ckpt.model, record.doc, ckpt.vocab, infer_cfg);

            json entry;
            entry["id"] = record.id;
            json sentences = json::array();
            LabeledPair pred;
            for (std::size_t i = 0; i < result.summary.sentences.size(); ++i) {
                const ParsedSentence& s = result.summary.sentences[i];
                json js;
                js["style"] = s.label.kind == StyleKind::Ext ? "ext" : "abs";
                if (s.label.kind == StyleKind::Ext)
                    js["source"] = s.label.source_index;
                else
                    js["source"] = nullptr;
                js["tokens"] = s.tokens;
                sentences.push_back(std::move(js));
                LabeledSentence ls;
                ls.sentence = make_sentence(s.tokens, static_cast<int>(i) + 1);
                ls.label = s.label;
                pred.summary.push_back(std::move(ls));
            }
            entry["sentences"] = std::move(sentences);
            out << entry.dump() << "\n";
            fold_stats(agg, pred);
            ++generated;
        } catch (const std::exception& e) {
            if (!opt.skip_errors) throw;
            std::cerr << "skipping line " << line_no << ": " << e.what() << "\n";
            ++skipped;
        }
    }
    if (generated == 0) throw std::runtime_error("no records in " + opt.corpus);

    if (!opt.report.empty()) {
        write_position_csv(opt.report + "_positions.csv", agg);
        write_transition_csv(opt.report + "_transitions.csv", agg);
        manifest.add_output(opt.report + "_positions.csv");
        manifest.add_output(opt.report + "_transitions.csv");
    }

    std::cout << "generated " << generated << " summaries";
    if (skipped > 0) std::cout << " (skipped " << skipped << ")";
    std::cout << "\n";
    print_style_stats(agg);
    manifest.note("generated", generated);
    manifest.write();
    return kExitOk;
}

// -------------------------------------------------------------- correlate --

struct CorrelateOpts {
    std::string metrics;
    std::string annotations;
    std::string output = "correlation.csv";
};

int run_correlate(const CorrelateOpts& opt) {
    ManifestWriter manifest("correlate", json::object());
    manifest.add_input(opt.metrics);
    manifest.add_input(opt.annotations);
    manifest.add_output(opt.output);

    std::ifstream in = open_input(opt.metrics);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("empty metrics file");
    std::vector<std::string> columns;
    {
        std::stringstream ss(header);
        std::string cell;
        while (std::getline(ss, cell, ',')) columns.push_back(cell);
    }
    auto column = [&](const std::string& name) {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return static_cast<int>(i);
        throw std::runtime_error("metrics file lacks column " + name);
    };
    const std::vector<std::string> metric_names = {"novel1",   "novel2",  "novel3",
                                                   "coverage", "density", "fusion_index"};
    int id_col = column("doc_id");
    int index_col = column("sentence_index");
    std::vector<int> metric_cols;
    for (const std::string& name : metric_names) metric_cols.push_back(column(name));

    std::map<std::string, std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != columns.size())
            throw std::runtime_error("metrics row with wrong column count: " + line);
        std::vector<double> values;
        for (int c : metric_cols) values.push_back(std::stod(cells[c]));
        rows[cells[id_col] + "#" + cells[index_col]] = std::move(values);
    }

    std::vector<Annotation> annotations = read_annotations(opt.annotations);
    if (annotations.empty()) throw std::runtime_error("no annotations in " + opt.annotations);
    std::vector<std::string> offenders;
    std::vector<double> human;
    std::vector<std::vector<double>> series(metric_names.size());
    for (const Annotation& a : annotations) {
        auto it = rows.find(a.doc_id + "#" + std::to_string(a.sentence_index));
        if (it == rows.end()) {
            offenders.push_back(a.doc_id + "#" + std::to_string(a.sentence_index));
            continue;
        }
        human.push_back(a.human_fusion_degree);
        for (std::size_t mi = 0; mi < metric_names.size(); ++mi)
            series[mi].push_back(it->second[mi]);
    }
    if (!offenders.empty()) {
        std::string msg = "annotations missing from the metrics file:";
        for (const std::string& o : offenders) msg += " " + o;
        throw std::runtime_error(msg);
    }

    std::ofstream out = open_output(opt.output);
    out << "metric,pearson\n";
    for (std::size_t mi = 0; mi < metric_names.size(); ++mi) {
        std::string value;
        try {
            value = fmt(pearson(series[mi], human));
        } catch (const std::exception&) {
            value = "undefined";  // zero-variance or too few points
        }
        out << metric_names[mi] << "," << value << "\n";
        std::cout << metric_names[mi] << ": " << value << "\n";
    }
    manifest.note("joined_rows", human.size());
    manifest.write();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Summary-style metrics, oracle labeling, and a toy adaptive model"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("sumstyle ") + kVersion);

    AnalyzeOpts analyze_opts;
    CLI::App* analyze = app.add_subcommand("analyze", "Per-sentence style metrics");
    analyze->add_option("input", analyze_opts.input, "Corpus JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    analyze->add_option("-o,--output", analyze_opts.output, "Per-sentence metrics CSV");
    analyze->add_option("--aggregate", analyze_opts.aggregate, "Aggregate CSV path");
    analyze->add_option("--k", analyze_opts.k, "Top-K for scatter")->check(CLI::PositiveNumber);
    analyze->add_option("--chunk-size", analyze_opts.chunk_size, "Records per chunk")
        ->check(CLI::PositiveNumber);
    analyze->add_flag("--skip-errors", analyze_opts.skip_errors, "Skip malformed lines");

    LabelOpts label_opts;
    CLI::App* label = app.add_subcommand("label", "Oracle ext/abs labeling");
    label->add_option("input", label_opts.input, "Corpus JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    label->add_option("-o,--output", label_opts.output, "Label JSONL");
    label->add_option("--k", label_opts.k, "Top-K for scatter")->check(CLI::PositiveNumber);
    label->add_option("--gamma", label_opts.gamma, "Fusion-index threshold")
        ->check(CLI::Range(0.0, 1.0));
    label->add_option("--chunk-size", label_opts.chunk_size, "Records per chunk")
        ->check(CLI::PositiveNumber);
    label->add_flag("--skip-errors", label_opts.skip_errors, "Skip malformed lines");

    TuneOpts tune_opts;
    CLI::App* tune = app.add_subcommand("tune", "Tune K and gamma against annotations");
    tune->add_option("--annotations", tune_opts.annotations, "Annotation JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    tune->add_option("--corpus", tune_opts.corpus, "Corpus JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    tune->add_option("-o,--output", tune_opts.output, "Tuning report CSV");
    tune->add_option("--k-candidates", tune_opts.k_candidates, "Candidate K values")
        ->delimiter(',');
    tune->add_option("--gamma-candidates", tune_opts.gamma_candidates,
                     "Candidate gamma values")
        ->delimiter(',');
    tune->add_option("--k", tune_opts.k, "K used for the gamma table")
        ->check(CLI::PositiveNumber);

    TrainOpts train_opts;
    CLI::App* train = app.add_subcommand("toy-train", "Train the toy adaptive model");
    train->add_option("--corpus", train_opts.corpus, "Corpus JSONL")->check(CLI::ExistingFile);
    train->add_option("--synthetic", train_opts.synthetic, "Generate N synthetic pairs")
        ->check(CLI::PositiveNumber);
    train->add_option("--style-mix", train_opts.style_mix, "Ext fraction for synthetic")
        ->check(CLI::Range(0.0, 1.0));
    train->add_option("--corpus-seed", train_opts.corpus_seed, "Synthetic corpus seed");
    train->add_option("--dump-corpus", train_opts.dump_corpus,
                      "Write the labeled training corpus as JSONL");
    train->add_option("--k", train_opts.k, "Oracle top-K")->check(CLI::PositiveNumber);
    train->add_option("--gamma", train_opts.gamma, "Oracle threshold")
        ->check(CLI::Range(0.0, 1.0));
    train->add_option("--d-model", train_opts.d_model)->check(CLI::PositiveNumber);
    train->add_option("--heads", train_opts.heads)->check(CLI::PositiveNumber);
    train->add_option("--layers", train_opts.layers)->check(CLI::PositiveNumber);
    train->add_option("--ffn", train_opts.ffn)->check(CLI::PositiveNumber);
    train->add_option("--max-positions", train_opts.max_positions,
                      "Decoder window (0 = sized from data)")
        ->check(CLI::NonNegativeNumber);
    train->add_option("--model-seed", train_opts.model_seed);
    train->add_option("--lr", train_opts.train.lr)->check(CLI::PositiveNumber);
    train->add_option("--batch-size", train_opts.train.batch_size)
        ->check(CLI::PositiveNumber);
    train->add_option("--kappa", train_opts.train.kappa)->check(CLI::NonNegativeNumber);
    train->add_option("--seed", train_opts.train.seed, "Training shuffle seed");
    train->add_option("--pretrain-epochs", train_opts.train.pretrain_epochs)
        ->check(CLI::NonNegativeNumber);
    train->add_option("--prefinetune-epochs", train_opts.train.prefinetune_epochs)
        ->check(CLI::NonNegativeNumber);
    train->add_option("--joint-epochs", train_opts.train.joint_epochs)
        ->check(CLI::NonNegativeNumber);
    train->add_option("--checkpoint", train_opts.checkpoint, "Checkpoint output path");
    train->add_option("--log", train_opts.log, "Training log CSV");

    InferOpts infer_opts;
    CLI::App* inferc = app.add_subcommand("toy-infer", "Generate summaries from a checkpoint");
    inferc->add_option("--checkpoint", infer_opts.checkpoint, "Checkpoint path")
        ->required()
        ->check(CLI::ExistingFile);
    inferc->add_option("--corpus", infer_opts.corpus, "Corpus JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    inferc->add_option("-o,--output", infer_opts.output, "Generated JSONL");
    inferc->add_option("--report", infer_opts.report, "Prefix for style report CSVs");
    inferc->add_option("--max-output-tokens", infer_opts.max_output_tokens)
        ->check(CLI::NonNegativeNumber);
    inferc->add_flag("--skip-errors", infer_opts.skip_errors, "Skip failing records");

    CorrelateOpts corr_opts;
    CLI::App* corr = app.add_subcommand("correlate", "Pearson table against annotations");
    corr->add_option("--metrics", corr_opts.metrics, "Metrics CSV from analyze")
        ->required()
        ->check(CLI::ExistingFile);
    corr->add_option("--annotations", corr_opts.annotations, "Annotation JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    corr->add_option("-o,--output", corr_opts.output, "Correlation CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the usage message
        return kExitUsage;
    }

    try {
        if (analyze->parsed()) return run_analyze(analyze_opts);
        if (label->parsed()) return run_label(label_opts);
        if (tune->parsed()) return run_tune(tune_opts);
        if (train->parsed()) {
            if ((train_opts.synthetic > 0) == !train_opts.corpus.empty())
                throw CLI::ValidationError(
                    "toy-train", "exactly one of --corpus / --synthetic is required");
            return run_toy_train(train_opts);
        }
        if (inferc->parsed()) return run_toy_infer(infer_opts);
        if (corr->parsed()) return run_correlate(corr_opts);
    } catch (const CLI::Error& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const TrainingError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}
