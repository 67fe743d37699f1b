#include "docspan/app.hpp"

#include <pthread.h>
#include <unistd.h>

#include <algorithm>
#include <csignal>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <openssl/evp.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "docspan/augment.hpp"
#include "docspan/consistency.hpp"
#include "docspan/corpus.hpp"
#include "docspan/error.hpp"
#include "docspan/postprocess.hpp"
#include "docspan/protocol.hpp"
#include "docspan/schedule.hpp"
#include "docspan/strategy.hpp"
#include "docspan/text.hpp"
#include "docspan/translate.hpp"

namespace docspan::app {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

namespace {

std::string read_all(std::istream& in) {
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::missing_input, "cannot open input file: " + path);
    return sha256_hex(read_all(in));
}

ordered_json PipelineConfig::to_json() const {
    ordered_json j;
    j["separator"] = separator;
    j["seed"] = seed;
    j["workers"] = workers;
    j["retries"] = retries;
    j["timeout_ms"] = timeout_ms;
    j["format"] = format;
    j["budget"] = budget;
    j["budget_side"] = budget_side;
    j["upsample"] = upsample;
    j["max_units"] = max_units ? ordered_json(*max_units) : ordered_json(nullptr);
    j["unit_mode"] = unit_mode;
    j["mode"] = mode;
    j["pre"] = pre;
    j["main"] = main;
    j["total"] = total;
    j["limit"] = limit;
    j["cascade"] = cascade;
    j["max_repeats"] = max_repeats;
    j["max_wordlen"] = max_wordlen;
    j["backend"] = backend;
    j["backend_for"] = backend_for;
    j["repetitions"] = repetitions;
    j["quotes"] = quotes;
    j["keep"] = keep;
    j["paths"] = paths;
    return j;
}

void PipelineConfig::merge_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::config_invalid, "configuration must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "separator") separator = value.get<std::string>();
            else if (key == "seed") seed = value.get<std::uint64_t>();
            else if (key == "workers") workers = value.get<std::size_t>();
            else if (key == "retries") retries = value.get<std::size_t>();
            else if (key == "timeout_ms") timeout_ms = value.get<std::size_t>();
            else if (key == "format") format = value.get<std::string>();
            else if (key == "budget") budget = value.get<std::size_t>();
            else if (key == "budget_side") budget_side = value.get<std::string>();
            else if (key == "upsample") upsample = value.get<std::size_t>();
            else if (key == "max_units") {
                if (value.is_null()) max_units.reset();
                else max_units = value.get<std::size_t>();
            }
            else if (key == "unit_mode") unit_mode = value.get<std::string>();
            else if (key == "mode") mode = value.get<std::string>();
            else if (key == "pre") pre = value.get<std::size_t>();
            else if (key == "main") main = value.get<std::size_t>();
            else if (key == "total") total = value.get<std::size_t>();
            else if (key == "limit") limit = value.get<std::size_t>();
            else if (key == "cascade") cascade = value.get<std::string>();
            else if (key == "max_repeats") max_repeats = value.get<std::size_t>();
            else if (key == "max_wordlen") max_wordlen = value.get<std::size_t>();
            else if (key == "backend") backend = value.get<std::string>();
            else if (key == "backend_for") backend_for = value.get<std::map<std::string, std::string>>();
            else if (key == "repetitions") repetitions = value.get<bool>();
            else if (key == "quotes") quotes = value.get<bool>();
            else if (key == "keep") keep = value.get<std::size_t>();
            else if (key == "paths") {
                for (const auto& [name, path] : value.items()) paths[name] = path.get<std::string>();
            }
            else throw Error(ErrorCode::config_invalid, "unknown configuration key '" + key + "'");
        } catch (const json::exception& e) {
            throw Error(ErrorCode::config_invalid, "configuration key '" + key + "': " + e.what());
        }
    }
}

namespace {

BudgetSide budget_side_of(const std::string& s) {
    if (s == "source") return BudgetSide::source;
    if (s == "max") return BudgetSide::max_of_both;
    throw Error(ErrorCode::config_invalid, "budget side must be 'source' or 'max', got '" + s + "'");
}

UnitMode unit_mode_of(const std::string& s) {
    if (s == "chars") return UnitMode::chars;
    if (s == "est_subwords") return UnitMode::est_subwords;
    throw Error(ErrorCode::config_invalid, "unit mode must be 'chars' or 'est_subwords', got '" + s + "'");
}

DecodeMode decode_mode_of(const std::string& s) {
    if (s == "windows") return DecodeMode::windows;
    if (s == "nonoverlap") return DecodeMode::nonoverlap;
    throw Error(ErrorCode::config_invalid, "mode must be 'windows' or 'nonoverlap', got '" + s + "'");
}

CorpusFormat format_of(const std::string& s) {
    if (s == "blank") return CorpusFormat::blank_line;
    if (s == "tsv") return CorpusFormat::docid_tsv;
    throw Error(ErrorCode::config_invalid, "format must be 'blank' or 'tsv', got '" + s + "'");
}

AugmentConfig augment_config(const PipelineConfig& c) {
    AugmentConfig a;
    a.char_budget = c.budget;
    a.separator = SeparatorToken(c.separator);
    a.seed = c.seed;
    a.upsample_factor = c.upsample;
    a.budget_side = budget_side_of(c.budget_side);
    if (c.max_units) a.length_filter = LengthFilter{*c.max_units, unit_mode_of(c.unit_mode)};
    return a;
}

ScheduleConfig schedule_config(const PipelineConfig& c) {
    ScheduleConfig s;
    s.mode = decode_mode_of(c.mode);
    s.limits = {c.pre, c.main, c.total};
    s.nonoverlap_limit = c.limit;
    return s;
}

PositionalConfig positional_config(const PipelineConfig& c) {
    PositionalConfig p;
    p.rules = {c.max_repeats, c.max_wordlen};
    p.cascade = parse_cascade(c.cascade);
    return p;
}

RepetitionRule repetition_rule(const PipelineConfig& c) {
    RepetitionRule r;
    r.keep = c.keep;
    return r;
}

ClientOptions client_options(const PipelineConfig& c) { return {c.workers, c.retries, c.timeout_ms}; }

}  // namespace

void PipelineConfig::validate() const {
    SeparatorToken sep(separator);
    if (workers < 1) throw Error(ErrorCode::config_invalid, "workers must be at least 1");
    if (timeout_ms < 1) throw Error(ErrorCode::config_invalid, "timeout must be at least 1 ms");
    format_of(format);
    augment_config(*this).validate();
    if (max_units && *max_units < 1) throw Error(ErrorCode::config_invalid, "max units must be at least 1");
    unit_mode_of(unit_mode);
    schedule_config(*this).validate();
    positional_config(*this).rules.validate();
    repetition_rule(*this).validate();
    parse_backend_spec(backend);
    for (const auto& [label, spec] : backend_for) {
        PositionLabel::parse(label);
        parse_backend_spec(spec);
    }
}

namespace {

/// Overrides collected from the command line; set fields win over the file.
struct Flags {
    std::optional<std::string> config_path;
    std::optional<std::string> manifest_path;
    std::string log_level = "warn";

    std::optional<std::string> separator;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::size_t> retries;
    std::optional<std::size_t> timeout_ms;
    std::optional<std::string> format;

    std::optional<std::size_t> budget;
    std::optional<std::string> budget_side;
    std::optional<std::size_t> upsample;
    std::optional<std::size_t> max_units;
    std::optional<std::string> unit_mode;

    std::optional<std::string> mode;
    std::optional<std::size_t> pre;
    std::optional<std::size_t> main;
    std::optional<std::size_t> total;
    std::optional<std::size_t> limit;

    std::optional<std::string> cascade;
    std::optional<std::size_t> max_repeats;
    std::optional<std::size_t> max_wordlen;
    std::optional<std::string> backend;
    std::vector<std::string> backend_for;

    bool repetitions = false;
    bool quotes = false;
    std::optional<std::size_t> keep;

    std::map<std::string, std::string> paths;
    bool reverse_flipped = false;
    bool divergent_only = false;

    // serve-mock
    std::optional<std::string> listen;
    bool stdio = false;
    std::string mock = "identity";
};

template <typename T>
void apply(std::optional<T> flag, T& field) {
    if (flag) field = *flag;
}

PipelineConfig effective_config(const Flags& f) {
    PipelineConfig c;
    if (f.config_path) {
        std::ifstream in(*f.config_path);
        if (!in) throw Error(ErrorCode::missing_input, "cannot open configuration file: " + *f.config_path);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::config_invalid, "configuration file " + *f.config_path + ": " + e.what());
        }
        c.merge_json(j);
    }
    apply(f.separator, c.separator);
    apply(f.seed, c.seed);
    apply(f.workers, c.workers);
    apply(f.retries, c.retries);
    apply(f.timeout_ms, c.timeout_ms);
    apply(f.format, c.format);
    apply(f.budget, c.budget);
    apply(f.budget_side, c.budget_side);
    apply(f.upsample, c.upsample);
    if (f.max_units) c.max_units = f.max_units;
    apply(f.unit_mode, c.unit_mode);
    apply(f.mode, c.mode);
    apply(f.pre, c.pre);
    apply(f.main, c.main);
    apply(f.total, c.total);
    apply(f.limit, c.limit);
    apply(f.cascade, c.cascade);
    apply(f.max_repeats, c.max_repeats);
    apply(f.max_wordlen, c.max_wordlen);
    apply(f.backend, c.backend);
    for (const auto& item : f.backend_for) {
        auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::config_invalid, "--backend-for expects LABEL=SPEC, got '" + item + "'");
        }
        c.backend_for[item.substr(0, eq)] = item.substr(eq + 1);
    }
    if (f.repetitions) c.repetitions = true;
    if (f.quotes) c.quotes = true;
    apply(f.keep, c.keep);
    for (const auto& [name, path] : f.paths) c.paths[name] = path;
    c.validate();
    return c;
}

/// Inputs are read fully up front and hashed for the manifest.
class Inputs {
public:
    explicit Inputs(std::istream& stdin_stream) : stdin_(stdin_stream) {}

    const std::string& read(const std::string& path) {
        std::string content;
        if (path == "-") {
            content = read_all(stdin_);
        } else {
            std::ifstream in(path, std::ios::binary);
            if (!in || fs::is_directory(path)) {
                throw Error(ErrorCode::missing_input, "cannot open input file: " + path);
            }
            content = read_all(in);
        }
        entries_.push_back({path, std::move(content)});
        return entries_.back().content;
    }

    ordered_json manifest() const {
        ordered_json list = ordered_json::array();
        for (const auto& e : entries_) list.push_back({{"path", e.path}, {"sha256", sha256_hex(e.content)}});
        return list;
    }

private:
    struct Entry {
        std::string path;
        std::string content;
    };
    std::istream& stdin_;
    std::deque<Entry> entries_;
};

/// Output contents are staged in memory, then written to temporary files in
/// the destination directories and renamed into place together. On failure
/// no temporary file and no partial output remains.
class Outputs {
public:
    explicit Outputs(std::ostream& stdout_stream) : stdout_(stdout_stream) {}

    void add(const std::string& path, std::string content) {
        for (auto& e : entries_) {
            if (e.path == path) {
                e.content = std::move(content);
                return;
            }
        }
        entries_.push_back({path, std::move(content)});
    }

    bool empty() const noexcept { return entries_.empty(); }

    /// First output written to a file, if any.
    std::optional<std::string> first_file() const {
        for (const auto& e : entries_) {
            if (e.path != "-") return e.path;
        }
        return std::nullopt;
    }

    ordered_json manifest() const {
        ordered_json list = ordered_json::array();
        for (const auto& e : entries_) list.push_back({{"path", e.path}, {"sha256", sha256_hex(e.content)}});
        return list;
    }

    void commit() {
        std::vector<std::pair<fs::path, fs::path>> staged;
        auto cleanup = [&] {
            std::error_code ec;
            for (const auto& [tmp, dst] : staged) fs::remove(tmp, ec);
        };
        try {
            for (const auto& e : entries_) {
                if (e.path == "-") continue;
                fs::path dst(e.path);
                if (dst.has_parent_path()) fs::create_directories(dst.parent_path());
                fs::path tmp = dst;
                tmp += ".tmp." + std::to_string(::getpid());
                staged.emplace_back(tmp, dst);
                std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
                out.write(e.content.data(), static_cast<std::streamsize>(e.content.size()));
                out.close();
                if (!out) throw Error(ErrorCode::missing_input, "cannot write output file: " + e.path);
            }
            for (const auto& [tmp, dst] : staged) fs::rename(tmp, dst);
        } catch (const fs::filesystem_error& e) {
            cleanup();
            throw Error(ErrorCode::missing_input, std::string("cannot write output: ") + e.what());
        } catch (...) {
            cleanup();
            throw;
        }
        for (const auto& e : entries_) {
            if (e.path == "-") stdout_ << e.content << std::flush;
        }
    }

private:
    struct Entry {
        std::string path;
        std::string content;
    };
    std::ostream& stdout_;
    std::vector<Entry> entries_;
};

struct Run {
    std::string subcommand;
    PipelineConfig config;
    Flags flags;
    Inputs inputs;
    Outputs outputs;
    ordered_json counts = ordered_json::object();
    std::shared_ptr<spdlog::logger> log;
    /// Default manifest location when outputs go to a directory.
    std::optional<std::string> manifest_dir;

    Run(std::istream& in, std::ostream& out) : inputs(in), outputs(out) {}

    const std::string& path(const std::string& name) const {
        auto it = config.paths.find(name);
        if (it == config.paths.end() || it->second.empty()) {
            throw Error(ErrorCode::config_invalid, "missing required path --" + name);
        }
        return it->second;
    }

    std::optional<std::string> optional_path(const std::string& name) const {
        auto it = config.paths.find(name);
        if (it == config.paths.end() || it->second.empty()) return std::nullopt;
        return it->second;
    }

    std::string path_or(const std::string& name, std::string fallback) const {
        return optional_path(name).value_or(std::move(fallback));
    }

    void finish() {
        std::optional<std::string> manifest = flags.manifest_path;
        if (!manifest) {
            if (manifest_dir) manifest = (fs::path(*manifest_dir) / "manifest.json").string();
            else if (auto first = outputs.first_file()) manifest = *first + ".manifest.json";
        }
        if (manifest) {
            ordered_json m;
            auto cfg = config.to_json();
            m["subcommand"] = subcommand;
            m["config"] = cfg;
            m["config_hash"] = sha256_hex(cfg.dump());
            m["seed"] = config.seed;
            m["inputs"] = inputs.manifest();
            m["outputs"] = outputs.manifest();
            m["counts"] = counts;
            outputs.add(*manifest, m.dump(2) + "\n");
        }
        outputs.commit();
    }
};

std::vector<Document> read_corpus(Run& run, const std::string& path, const SeparatorToken* sep) {
    std::istringstream in(run.inputs.read(path));
    auto parsed = parse_document_corpus(in, format_of(run.config.format), sep);
    for (const auto& w : parsed.warnings) run.log->warn("{}:{}: {}", path, w.line_number, w.message);
    return std::move(parsed.documents);
}

std::string corpus_text(std::span<const Document> docs, const std::string& format) {
    std::ostringstream os;
    write_document_corpus(os, docs, format_of(format));
    return os.str();
}

std::string lines_text(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& line : lines) {
        out += line;
        out += '\n';
    }
    return out;
}

// augment ------------------------------------------------------------------

void run_augment(Run& run) {
    const auto& c = run.config;
    AugmentConfig config = augment_config(c);
    const SeparatorToken& sep = config.separator;

    auto auth_src = read_corpus(run, run.path("authentic-src"), &sep);
    auto auth_tgt = read_corpus(run, run.path("authentic-tgt"), &sep);
    auto authentic = pair_documents(auth_src, auth_tgt);

    std::vector<ParallelDocument> synthetic;
    auto syn_src_path = run.optional_path("synthetic-src");
    auto syn_tgt_path = run.optional_path("synthetic-tgt");
    if (syn_src_path.has_value() != syn_tgt_path.has_value()) {
        throw Error(ErrorCode::config_invalid, "--synthetic-src and --synthetic-tgt must be given together");
    }
    if (syn_src_path) {
        auto syn_src = read_corpus(run, *syn_src_path, &sep);
        auto syn_tgt = read_corpus(run, *syn_tgt_path, &sep);
        synthetic = pair_documents(syn_src, syn_tgt);
    }

    AugmentCounts auth_counts;
    AugmentCounts syn_counts;
    auto auth_stream = build_stream(authentic, config, Origin::authentic, &auth_counts);
    auto syn_stream = build_stream(synthetic, config, Origin::synthetic, &syn_counts);

    const std::string dir = run.path("out-dir");
    run.manifest_dir = dir;
    auto emit = [&](const std::vector<SequencePair>& stream, const std::string& name) {
        std::string src;
        std::string tgt;
        for (const auto& seq : stream) {
            auto encoded = encode_sequence(seq, sep);
            src += encoded.source + '\n';
            tgt += encoded.target + '\n';
        }
        run.outputs.add((fs::path(dir) / (name + ".src")).string(), std::move(src));
        run.outputs.add((fs::path(dir) / (name + ".tgt")).string(), std::move(tgt));
    };
    emit(auth_stream, "authentic");
    emit(syn_stream, "synthetic");

    if (auto report = run.optional_path("report")) {
        std::vector<std::string> lines;
        auto add = [&](std::span<const ParallelDocument> docs, const char* origin) {
            for (const auto& r : upsampling_report(docs, config.char_budget, config.budget_side)) {
                ordered_json j;
                j["origin"] = origin;
                j["doc_id"] = r.doc_id;
                j["occurrences"] = r.counts;
                lines.push_back(j.dump());
            }
        };
        add(authentic, "authentic");
        add(synthetic, "synthetic");
        run.outputs.add(*report, lines_text(lines));
    }

    auto counts_json = [](const AugmentCounts& k, std::size_t docs) {
        ordered_json j;
        j["documents"] = docs;
        j["enumerated"] = k.enumerated;
        j["length_filtered"] = k.length_filtered;
        j["emitted"] = k.emitted;
        return j;
    };
    run.counts["authentic"] = counts_json(auth_counts, authentic.size());
    run.counts["synthetic"] = counts_json(syn_counts, synthetic.size());
    run.log->info("augment: {} authentic and {} synthetic sequences", auth_counts.emitted, syn_counts.emitted);
}

// plan ---------------------------------------------------------------------

void run_plan(Run& run) {
    SeparatorToken sep(run.config.separator);
    auto docs = read_corpus(run, run.path("input"), &sep);
    auto schedule = schedule_config(run.config);
    std::vector<std::string> lines;
    std::size_t oversized = 0;
    for (const auto& doc : docs) {
        for (const auto& plan : plan_document(doc, schedule)) {
            lines.push_back(plan_dump_line(plan));
            if (plan.oversized) ++oversized;
        }
    }
    run.outputs.add(run.path_or("output", "-"), lines_text(lines));
    run.counts["documents"] = docs.size();
    run.counts["windows"] = lines.size();
    run.counts["oversized"] = oversized;
}

// translate ----------------------------------------------------------------

std::string postprocess_line(const std::string& line, const PipelineConfig& c, const RepetitionRule& rule,
                             QuoteStats* quotes) {
    std::string out = c.repetitions ? remove_repetitions(line, rule) : line;
    if (c.quotes) out = convert_quotes(out, c.separator, quotes);
    return out;
}

void run_translate_doc(Run& run) {
    const auto& c = run.config;
    SeparatorToken sep(c.separator);
    auto docs = read_corpus(run, run.path("input"), &sep);
    auto backend = make_backend(parse_backend_spec(c.backend), sep, client_options(c));
    RequestIds ids;

    auto runs = run_documents(docs, schedule_config(c), *backend, sep, ids);

    const auto rule = repetition_rule(c);
    QuoteStats quotes;
    std::vector<Document> translated;
    std::vector<std::string> plan_lines;
    std::size_t windows = 0;
    std::size_t backups = 0;
    std::size_t failed_windows = 0;
    std::size_t sentences = 0;
    for (const auto& r : runs) {
        Document doc{r.translation.doc_id, {}};
        for (const auto& s : r.translation.sentences) doc.sentences.emplace_back(postprocess_line(s, c, rule, &quotes));
        translated.push_back(std::move(doc));
        windows += r.plans.size();
        backups += r.translation.backup_indices.size();
        sentences += r.translation.sentences.size();
        std::size_t first = 0;
        for (const auto& plan : r.plans) {
            auto& bi = r.translation.backup_indices;
            if (std::find(bi.begin(), bi.end(), first) != bi.end()) ++failed_windows;
            first += plan.main.len;
            plan_lines.push_back(plan_dump_line(plan));
        }
    }
    if (backups > 0) run.log->warn("translate-doc: {} of {} sentences used single-sentence backup", backups, sentences);

    run.outputs.add(run.path_or("output", "-"), corpus_text(translated, c.format));
    if (auto plans = run.optional_path("plans")) run.outputs.add(*plans, lines_text(plan_lines));

    run.counts["documents"] = docs.size();
    run.counts["sentences"] = sentences;
    run.counts["windows"] = windows;
    run.counts["failed_windows"] = failed_windows;
    run.counts["backups"] = backups;
    run.counts["requests"] = ids.peek();
    if (c.quotes) run.counts["unbalanced_quote_segments"] = quotes.unbalanced_segments;
}

void run_translate_pos(Run& run) {
    const auto& c = run.config;
    SeparatorToken sep(c.separator);
    auto docs = read_corpus(run, run.path("input"), &sep);
    auto options = client_options(c);

    // Labels sharing a spec share one backend so identical spans are sent once.
    std::map<std::string, std::unique_ptr<Translator>> by_spec;
    auto backend_for_spec = [&](const std::string& spec) {
        auto& slot = by_spec[spec];
        if (!slot) slot = make_backend(parse_backend_spec(spec), sep, options);
        return slot.get();
    };
    PositionalBackends backends;
    backends.fallback = backend_for_spec(c.backend);
    for (const auto& [label, spec] : c.backend_for) backends.overrides[PositionLabel::parse(label)] = backend_for_spec(spec);

    auto config = positional_config(c);
    RequestIds ids;
    PositionalStats stats;
    std::vector<Document> translated;
    QuoteStats quotes;
    const auto rule = repetition_rule(c);
    std::size_t validated = 0;
    for (const auto& doc : docs) {
        auto result = run_document_positional(doc, backends, config, sep, ids);
        for (const auto& f : result.failures) {
            run.log->warn("translate-pos: no valid candidate for document '{}' sentence {}", f.doc_id,
                          f.sentence_index + 1);
        }
        validated += result.candidates.size();
        stats.merge(result.stats);
        Document out{result.translated.doc_id, {}};
        for (const auto& s : result.translated.sentences) out.sentences.emplace_back(postprocess_line(s.text(), c, rule, &quotes));
        translated.push_back(std::move(out));
    }

    run.outputs.add(run.path_or("output", "-"), corpus_text(translated, c.format));
    if (auto p = run.optional_path("stats")) run.outputs.add(*p, stats.table());
    if (auto p = run.optional_path("stats-jsonl")) run.outputs.add(*p, lines_text(stats.jsonl()));

    ordered_json chosen = ordered_json::object();
    for (const auto& label : all_labels()) {
        auto it = stats.per_label.find(label);
        chosen[label.str()] = it == stats.per_label.end() ? 0 : it->second.chosen;
    }
    run.counts["documents"] = docs.size();
    run.counts["sentences"] = stats.sentences;
    run.counts["requests"] = stats.requests;
    run.counts["candidates_validated"] = validated;
    run.counts["no_valid"] = stats.no_valid;
    run.counts["chosen"] = chosen;
    if (c.quotes) run.counts["unbalanced_quote_segments"] = quotes.unbalanced_segments;
}

// postprocess --------------------------------------------------------------

void run_postprocess(Run& run) {
    const auto& c = run.config;
    const auto rule = repetition_rule(c);
    std::istringstream in(run.inputs.read(run.path_or("input", "-")));
    std::string out;
    std::string line;
    std::size_t lines = 0;
    std::size_t changed = 0;
    QuoteStats quotes;
    while (std::getline(in, line)) {
        auto processed = postprocess_line(line, c, rule, &quotes);
        ++lines;
        if (processed != line) ++changed;
        out += processed;
        out += '\n';
    }
    if (quotes.unbalanced_segments > 0) {
        run.log->warn("postprocess: {} segments with an unpaired quote", quotes.unbalanced_segments);
    }
    run.outputs.add(run.path_or("output", "-"), std::move(out));
    run.counts["lines"] = lines;
    run.counts["lines_changed"] = changed;
    run.counts["quotes_converted"] = quotes.converted;
    run.counts["unbalanced_quote_segments"] = quotes.unbalanced_segments;
}

// consistency --------------------------------------------------------------

TokenLines read_tokens(Run& run, const std::string& path) {
    std::istringstream in(run.inputs.read(path));
    return read_token_lines(in);
}

std::vector<SentenceLinks> read_links(Run& run, const std::string& path) {
    std::istringstream in(run.inputs.read(path));
    try {
        return parse_pharaoh(in);
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
}

void run_consistency(Run& run) {
    auto src_tokens = read_tokens(run, run.path("src-tokens"));
    auto src_lemmas = read_tokens(run, run.path("src-lemmas"));
    std::vector<DocumentRange> ranges;
    {
        std::istringstream in(run.inputs.read(run.path("doc-ranges")));
        ranges = parse_document_ranges(in);
    }

    LemmaMapOptions options;
    if (auto stoplist = run.optional_path("stoplist")) {
        std::istringstream in(run.inputs.read(*stoplist));
        std::string line;
        while (std::getline(in, line)) {
            auto t = text::trim(line);
            if (!t.empty()) options.stoplist.insert(text::fold_case(t));
        }
    }

    struct System {
        TokenLines tokens;
        TokenLines lemmas;
        std::vector<SentenceLinks> forward;
        std::vector<SentenceLinks> reverse;
        std::vector<DocumentLemmaMap> maps;
    };
    auto load = [&](const std::string& side) {
        System s;
        s.tokens = read_tokens(run, run.path(side + "-tokens"));
        s.lemmas = read_tokens(run, run.path(side + "-lemmas"));
        s.forward = read_links(run, run.path(side + "-fwd"));
        s.reverse = read_links(run, run.path(side + "-rev"));
        SystemFiles files{&s.tokens, &s.lemmas, s.forward, s.reverse};
        s.maps = build_system_maps(ranges, src_tokens, src_lemmas, files, options, run.flags.reverse_flipped);
        return s;
    };
    System a = load("a");
    System b = load("b");

    auto records_a = find_divergences(a.maps);
    auto records_b = find_divergences(b.maps);
    auto comparison = compare_systems(a.maps, b.maps, CompareOptions{run.flags.divergent_only});

    std::vector<std::string> lines_a;
    std::vector<std::string> lines_b;
    std::vector<std::string> lines_cmp;
    for (const auto& r : records_a) lines_a.push_back(divergence_json(r));
    for (const auto& r : records_b) lines_b.push_back(divergence_json(r));
    for (const auto& e : comparison) lines_cmp.push_back(comparison_json(e));

    // The review sheet lists the largest disagreements first.
    auto review_order = comparison;
    std::stable_sort(review_order.begin(), review_order.end(), [](const auto& x, const auto& y) {
        return std::max(x.count_a, x.count_b) > std::max(y.count_a, y.count_b);
    });
    ReviewContext context{ranges, &src_tokens, &a.tokens, &b.tokens, a.maps, b.maps};

    const std::string dir = run.path("out-dir");
    run.manifest_dir = dir;
    run.outputs.add((fs::path(dir) / "records_a.jsonl").string(), lines_text(lines_a));
    run.outputs.add((fs::path(dir) / "records_b.jsonl").string(), lines_text(lines_b));
    run.outputs.add((fs::path(dir) / "comparison.jsonl").string(), lines_text(lines_cmp));
    run.outputs.add((fs::path(dir) / "review.txt").string(), render_review(review_order, context));

    run.counts["documents"] = ranges.size();
    run.counts["sentences"] = src_tokens.size();
    run.counts["records_a"] = records_a.size();
    run.counts["records_b"] = records_b.size();
    run.counts["compared"] = comparison.size();
}

// serve-mock ---------------------------------------------------------------

int run_serve_mock(const Flags& flags, const PipelineConfig& c, std::istream& in, std::ostream& out) {
    SeparatorToken sep(c.separator);
    MockSpec mock = parse_mock_spec(flags.mock);
    if (flags.stdio == flags.listen.has_value()) {
        throw Error(ErrorCode::config_invalid, "serve-mock needs exactly one of --listen HOST:PORT or --stdio");
    }
    if (flags.stdio) {
        protocol::serve_stream(in, out, mock, sep);
        return 0;
    }
    const std::string& spec = *flags.listen;
    auto colon = spec.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorCode::config_invalid, "--listen expects HOST:PORT");
    std::string host = spec.substr(0, colon);
    unsigned long port = 0;
    try {
        std::size_t used = 0;
        port = std::stoul(spec.substr(colon + 1), &used);
        if (used != spec.size() - colon - 1 || port > 65535) throw std::out_of_range("port");
    } catch (const std::exception&) {
        throw Error(ErrorCode::config_invalid, "invalid port in --listen '" + spec + "'");
    }

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    protocol::MockServer server(host, static_cast<std::uint16_t>(port), mock, sep);
    server.start();
    out << "listening on " << host << ':' << server.port() << std::endl;
    int received = 0;
    sigwait(&signals, &received);
    server.stop();
    return 0;
}

void add_path(CLI::App* cmd, Flags& f, const std::string& name, const std::string& help) {
    cmd->add_option_function<std::string>("--" + name, [&f, name](const std::string& v) { f.paths[name] = v; }, help);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    Flags f;
    CLI::App app{"Document-level translation data and decoding pipeline", "docspan"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--config", f.config_path, "JSON configuration file; flags override its values");
    app.add_option("--seed", f.seed, "Seed for every random choice");
    app.add_option("--workers", f.workers, "Concurrent backend connections");
    app.add_option("--separator", f.separator, "Sentence separator token");
    app.add_option("--manifest", f.manifest_path, "Run manifest path");
    app.add_option("--log-level", f.log_level, "trace, debug, info, warn, error or off");
    app.add_option("--format", f.format, "Corpus format: blank or tsv");
    app.add_option("--retries", f.retries, "Retries per failed backend request");
    app.add_option("--timeout", f.timeout_ms, "Backend timeout in milliseconds");

    auto* augment = app.add_subcommand("augment", "Build multi-sentence training sequences");
    add_path(augment, f, "authentic-src", "Authentic source corpus");
    add_path(augment, f, "authentic-tgt", "Authentic target corpus");
    add_path(augment, f, "synthetic-src", "Back-translated source corpus");
    add_path(augment, f, "synthetic-tgt", "Back-translated target corpus");
    add_path(augment, f, "out-dir", "Directory for authentic.src/.tgt and synthetic.src/.tgt");
    add_path(augment, f, "report", "Per-sentence occurrence report (JSON lines)");
    augment->add_option("--budget", f.budget, "Character budget per sequence");
    augment->add_option("--budget-side", f.budget_side, "source or max");
    augment->add_option("--upsample", f.upsample, "Repeat the authentic and synthetic streams this many times");
    augment->add_option("--max-units", f.max_units, "Drop pairs longer than this");
    augment->add_option("--unit-mode", f.unit_mode, "chars or est_subwords");

    auto add_schedule = [&](CLI::App* cmd) {
        cmd->add_option("--mode", f.mode, "windows or nonoverlap");
        cmd->add_option("--pre", f.pre, "Pre-context limit");
        cmd->add_option("--main", f.main, "Main content limit");
        cmd->add_option("--total", f.total, "Window limit");
        cmd->add_option("--limit", f.limit, "Non-overlapping span limit");
    };
    auto add_post = [&](CLI::App* cmd, bool repetitions) {
        if (repetitions) cmd->add_flag("--repetitions", f.repetitions, "Collapse repeated phrases");
        cmd->add_flag("--quotes", f.quotes, "Convert straight double quotes");
        if (repetitions) cmd->add_option("--keep", f.keep, "Copies kept of a collapsed phrase");
    };

    auto* plan = app.add_subcommand("plan", "Dump decoding windows as JSON lines");
    add_path(plan, f, "input", "Document corpus");
    add_path(plan, f, "output", "Plan file (default stdout)");
    add_schedule(plan);

    auto* tdoc = app.add_subcommand("translate-doc", "Translate documents window by window");
    add_path(tdoc, f, "input", "Document corpus");
    add_path(tdoc, f, "output", "Translated corpus (default stdout)");
    add_path(tdoc, f, "plans", "Plan dump of the windows used");
    add_schedule(tdoc);
    tdoc->add_option("--backend", f.backend, "Backend spec");
    add_post(tdoc, true);

    auto* tpos = app.add_subcommand("translate-pos", "Translate sentences in positional contexts");
    add_path(tpos, f, "input", "Document corpus");
    add_path(tpos, f, "output", "Translated corpus (default stdout)");
    add_path(tpos, f, "stats", "Label usage table");
    add_path(tpos, f, "stats-jsonl", "Label usage as JSON lines");
    tpos->add_option("--cascade", f.cascade, "Label preference order");
    tpos->add_option("--max-repeats", f.max_repeats, "Allowed occurrences of one word");
    tpos->add_option("--max-wordlen", f.max_wordlen, "Allowed word length");
    tpos->add_option("--backend", f.backend, "Backend spec");
    tpos->add_option("--backend-for", f.backend_for, "LABEL=SPEC backend for one label (repeatable)");
    add_post(tpos, false);

    auto* post = app.add_subcommand("postprocess", "Clean up translated lines");
    add_path(post, f, "input", "Input lines (default stdin)");
    add_path(post, f, "output", "Output lines (default stdout)");
    add_post(post, true);

    auto* cons = app.add_subcommand("consistency", "Compare lexical consistency of two systems");
    add_path(cons, f, "src-tokens", "Tokenized source, one sentence per line");
    add_path(cons, f, "src-lemmas", "Source lemmas");
    add_path(cons, f, "doc-ranges", "Document ranges: doc_id, first line, line count");
    for (const std::string side : {"a", "b"}) {
        add_path(cons, f, side + "-tokens", "Tokenized translation of system " + side);
        add_path(cons, f, side + "-lemmas", "Translation lemmas of system " + side);
        add_path(cons, f, side + "-fwd", "Source-to-target alignment of system " + side);
        add_path(cons, f, side + "-rev", "Target-to-source alignment of system " + side);
    }
    add_path(cons, f, "stoplist", "Source lemmas to ignore, one per line");
    add_path(cons, f, "out-dir", "Directory for records, comparison and review sheet");
    cons->add_flag("--reverse-flipped", f.reverse_flipped, "Reverse alignments are already source-target");
    cons->add_flag("--divergent-only", f.divergent_only, "Compare only lemmas divergent in a system");

    auto* serve = app.add_subcommand("serve-mock", "Serve the mock translator over the line protocol");
    serve->add_option("--listen", f.listen, "HOST:PORT to listen on; port 0 picks one");
    serve->add_flag("--stdio", f.stdio, "Serve standard input and output");
    serve->add_option("--mock", f.mock, "Mock spec, e.g. word-reverse?fault=drop-separator&every=50");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return exit_status(ErrorCategory::config);
    }

    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    auto log = std::make_shared<spdlog::logger>("docspan", sink);
    log->set_pattern("%l: %v");
    log->set_level(spdlog::level::from_str(f.log_level));
    spdlog::set_pattern("%l: %v");
    spdlog::set_level(log->level());

    try {
        PipelineConfig config = effective_config(f);
        auto* sub = app.get_subcommands().front();
        if (sub == serve) return run_serve_mock(f, config, in, out);

        Run run(in, out);
        run.subcommand = sub->get_name();
        run.config = std::move(config);
        run.flags = f;
        run.log = log;
        if (sub == augment) run_augment(run);
        else if (sub == plan) run_plan(run);
        else if (sub == tdoc) run_translate_doc(run);
        else if (sub == tpos) run_translate_pos(run);
        else if (sub == post) run_postprocess(run);
        else if (sub == cons) run_consistency(run);
        run.finish();
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_status(e.category());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace docspan::app
