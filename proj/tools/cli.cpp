// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "catsynth/analysis.hpp"
#include "catsynth/concept_tree.hpp"
#include "catsynth/content_store.hpp"
#include "catsynth/dataset.hpp"
#include "catsynth/digest.hpp"
#include "catsynth/http_backends.hpp"
#include "catsynth/mock_backends.hpp"
#include "catsynth/parallel.hpp"
#include "catsynth/prompt_synth.hpp"
#include "catsynth/random.hpp"
#include "catsynth/records.hpp"

namespace catsynth::cli {

namespace fs = std::filesystem;
using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

namespace {

[[noreturn]] void config_error(const std::string& where, const std::string& message) {
    fail(ErrorCode::Config, where + ": " + message);
}

/// Typed access to one JSON object of the config file.
class Section {
public:
    Section(const Json& j, std::string where, std::initializer_list<const char*> keys)
        : j_(j), where_(std::move(where)) {
        if (!j.is_object()) {
            config_error(where_, "expected an object");
        }
        for (const auto& [key, value] : j.items()) {
            if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
                config_error(path(key), "unknown key");
            }
        }
    }

    bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
    const Json& at(const char* key) const { return j_.at(key); }
    std::string path(std::string_view key) const { return where_.empty() ? std::string(key) : where_ + "." + std::string(key); }

    template <typename T>
    void read(const char* key, T& out) const {
        if (has(key)) {
            out = convert<T>(j_.at(key), path(key));
        }
    }

    template <typename T>
    void read(const char* key, std::optional<T>& out) const {
        if (has(key)) {
            out = convert<T>(j_.at(key), path(key));
        }
    }

private:
    template <typename T>
    static T convert(const Json& v, const std::string& where) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) {
                config_error(where, "expected true or false");
            }
            return v.get<bool>();
        } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
                config_error(where, "expected a non-negative integer");
            }
            return v.get<T>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) {
                config_error(where, "expected an integer");
            }
            return v.get<T>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) {
                config_error(where, "expected a number");
            }
            return v.get<T>();
        } else {
            if (!v.is_string()) {
                config_error(where, "expected a string");
            }
            return T(v.get<std::string>());
        }
    }

    const Json& j_;
    std::string where_;
};

BackendConfig backend_from(const Json& j, const std::string& where) {
    Section s(j, where,
              {"endpoint", "credential_env", "model", "timeout_seconds", "max_retries", "max_in_flight",
               "backoff_seconds", "provider"});
    BackendConfig b;
    s.read("endpoint", b.endpoint);
    s.read("credential_env", b.credential_env);
    s.read("model", b.model);
    s.read("timeout_seconds", b.timeout_seconds);
    s.read("max_retries", b.max_retries);
    s.read("max_in_flight", b.max_in_flight);
    s.read("backoff_seconds", b.backoff_seconds);
    s.read("provider", b.provider);
    try {
        b.validate();
    } catch (const Error& e) {
        config_error(where, e.what());
    }
    return b;
}

std::string number_text(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Log {
public:
    explicit Log(std::ostream& os) : os_(os) {}

    void info(std::string_view event, const OrderedJson& fields = OrderedJson::object()) {
        write("info", event, fields);
    }
    void warn(std::string_view event, const OrderedJson& fields = OrderedJson::object()) {
        write("warn", event, fields);
    }
    void error(std::string_view event, const OrderedJson& fields = OrderedJson::object()) {
        write("error", event, fields);
    }

private:
    void write(std::string_view level, std::string_view event, const OrderedJson& fields) {
        OrderedJson line{{"level", level}, {"event", event}};
        for (const auto& [k, v] : fields.items()) {
            line[k] = v;
        }
        os_ << line.dump(-1, ' ', false, Json::error_handler_t::replace) << '\n';
        os_.flush();
    }

    std::ostream& os_;
};

struct Backends {
    bool chat = false;
    bool vlm = false;
    bool image = false;
    bool embed = false;
};

/// Configuration plus the backends one subcommand needs, all constructed
/// before any input is read.
class Session {
public:
    Session(PipelineConfig config, Log& log, Backends needs) : cfg(std::move(config)), log(log) {
        store = std::make_shared<ContentStore>(cfg.store);
        if (cfg.mock) {
            MockFixtures fixtures;
            if (!cfg.fixtures.empty()) {
                fixtures = MockFixtures::load(cfg.fixtures);
            }
            if (needs.chat || needs.vlm) {
                auto mock = std::make_shared<MockChat>(std::move(fixtures));
                chat_ = mock;
                vlm_ = mock;
            }
            if (needs.image) {
                image_ = std::make_shared<MockImageGenerator>(store);
            }
            if (needs.embed) {
                encoder_ = std::make_shared<CachedEmbedder>(std::make_shared<PixelFlattenEncoder>(store));
            }
            return;
        }
        auto need = [](const std::optional<BackendConfig>& c, const char* name) -> const BackendConfig& {
            if (!c) {
                config_error(std::string("backends.") + name, "not configured (pass --mock for offline runs)");
            }
            return *c;
        };
        if (needs.chat) {
            chat_ = std::make_shared<HttpChatBackend>(need(cfg.chat, "chat"), store);
        }
        if (needs.vlm) {
            vlm_ = std::make_shared<HttpChatBackend>(need(cfg.vlm ? cfg.vlm : cfg.chat, "vlm"), store);
        }
        if (needs.image) {
            image_ = std::make_shared<HttpImageBackend>(need(cfg.image, "image"), store);
        }
        if (needs.embed) {
            encoder_ = std::make_shared<CachedEmbedder>(
                std::make_shared<HttpEmbeddingBackend>(need(cfg.embed, "embed"), store));
        }
    }

    ChatBackend& chat() { return *chat_; }
    ChatBackend& vlm() { return *vlm_; }
    ImageBackend& image() { return *image_; }
    EmbeddingBackend& encoder() { return *encoder_; }

    PipelineConfig cfg;
    Log& log;
    std::shared_ptr<ContentStore> store;

private:
    std::shared_ptr<ChatBackend> chat_;
    std::shared_ptr<ChatBackend> vlm_;
    std::shared_ptr<ImageBackend> image_;
    std::shared_ptr<EmbeddingBackend> encoder_;
};

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".ppm" || ext == ".bmp" || ext == ".webp";
}

/// Files are taken as given; directories contribute their image files in
/// name order.
std::vector<fs::path> expand_images(const std::vector<std::string>& args) {
    std::vector<fs::path> out;
    for (const auto& a : args) {
        const fs::path p(a);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& entry : fs::directory_iterator(p)) {
                if (entry.is_regular_file() && is_image_file(entry.path())) {
                    found.push_back(entry.path());
                }
            }
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else if (fs::is_regular_file(p)) {
            out.push_back(p);
        } else {
            fail(ErrorCode::Io, "no such image file or directory: " + a);
        }
    }
    return out;
}

std::vector<ImageRef> ingest_all(ContentStore& store, const std::vector<std::string>& args) {
    std::vector<ImageRef> refs;
    for (const auto& p : expand_images(args)) {
        refs.push_back(store.ingest_file(p));
    }
    return refs;
}

std::string read_input(const std::string& path) {
    if (!fs::is_regular_file(path)) {
        fail(ErrorCode::Io, "no such file: " + path);
    }
    return read_file(path);
}

fs::path report_file(const std::string& arg) {
    return fs::is_directory(arg) ? fs::path(arg) / "pcs.jsonl" : fs::path(arg);
}

GenerationMode default_mode(SampleRole role) {
    return role == SampleRole::Positive ? GenerationMode::FinetunedSubject : GenerationMode::Base;
}

std::uint64_t generation_seed(std::uint64_t global_seed, const PromptSpec& spec) {
    return mix_seed(global_seed ^ digest64(spec.source_tree + "#" + std::to_string(spec.seed)));
}

std::size_t plan_size(const PipelineConfig& cfg, SampleRole role) {
    switch (role) {
    case SampleRole::Positive: return cfg.plan.positive;
    case SampleRole::EasyNegative: return cfg.plan.easy_negative;
    case SampleRole::HardNegative: return cfg.plan.hard_negative;
    }
    return cfg.plan.positive;
}

double threshold_for(const PipelineConfig& cfg, SampleRole role) {
    switch (role) {
    case SampleRole::Positive: return cfg.thresholds.positive;
    case SampleRole::HardNegative: return cfg.thresholds.hard_negative;
    case SampleRole::EasyNegative: return cfg.thresholds.text;
    }
    return cfg.thresholds.positive;
}

PerturbConfig perturb_for(const PipelineConfig& cfg) {
    PerturbConfig p = cfg.perturb;
    p.seed = cfg.perturb_seed.value_or(cfg.seed);
    return p;
}

// ---- subcommands ----------------------------------------------------------

struct BuildTreeArgs {
    std::vector<std::string> images;
    std::string out;
    std::string concept_id;
};

void build_tree_cmd(Session& s, const BuildTreeArgs& a) {
    const auto refs = ingest_all(*s.store, a.images);
    require(!refs.empty(), "build-tree needs at least one image");
    const std::string id = a.concept_id.empty() ? s.cfg.concept_id : a.concept_id;
    BuilderConfig bc = s.cfg.builder;
    bc.threads = s.cfg.threads;
    auto result = build_tree(refs, s.vlm(), s.chat(), bc, id);
    write_file_atomic(a.out, serialize(result.tree));
    s.log.info("tree_built", {{"out", a.out},
                              {"concept_id", result.tree.concept_id},
                              {"images", refs.size()},
                              {"dimensions", result.tree.dimensions.size()},
                              {"refine_iterations", result.refine.iterations},
                              {"converged", result.refine.converged}});
    if (!result.refine.converged) {
        s.log.warn("refine_not_converged", {{"iterations", result.refine.iterations}});
    }
}

struct EditTreeArgs {
    std::string tree;
    std::string op;
    int times = 1;
    std::string out;
};

void edit_tree_cmd(Session& s, const EditTreeArgs& a) {
    const ConceptTree tree = deserialize_tree(read_input(a.tree));
    const EditKind kind = *edit_kind_from_string(a.op);
    auto outcome = edit_tree_llm(tree, kind, a.times, s.chat());
    write_file_atomic(a.out, serialize(outcome.tree));
    s.log.info("tree_edited", {{"out", a.out},
                               {"op", a.op},
                               {"times", a.times},
                               {"concept_id", outcome.tree.concept_id},
                               {"space_before", assignment_space_size(tree)},
                               {"space_after", assignment_space_size(outcome.tree)}});
}

struct EasyTreeArgs {
    std::string tree;
    std::string out;
};

void easy_tree_cmd(Session& s, const EasyTreeArgs& a) {
    const ConceptTree tree = deserialize_tree(read_input(a.tree));
    const ConceptTree easy = derive_easy_negative_tree(tree, s.chat());
    write_file_atomic(a.out, serialize(easy));
    s.log.info("easy_tree_derived", {{"out", a.out}, {"concept_id", easy.concept_id}, {"root", easy.root}});
}

struct GenPromptsArgs {
    std::string input;
    std::string role;
    std::size_t limit = 0;
    std::string out;
    std::string subject_token;
    bool from_llm = false;
};

void gen_prompts_cmd(Session& s, const GenPromptsArgs& a) {
    const std::string doc = read_input(a.input);
    const SampleRole role = *sample_role_from_string(a.role);
    const std::size_t limit = a.limit > 0 ? a.limit : plan_size(s.cfg, role);
    std::vector<PromptSpec> plan;
    if (is_forest_document(doc)) {
        plan = forest_prompts(deserialize_forest(doc), role, limit, s.cfg.seed);
    } else {
        const ConceptTree tree = deserialize_tree(doc);
        if (a.from_llm) {
            auto result = llm_prompts(tree, role, s.chat(), limit);
            plan = std::move(result.prompts);
            if (plan.size() > limit) {
                plan.resize(limit);
            }
            if (result.short_count) {
                s.log.warn("short_prompt_list", {{"requested", limit}, {"received", plan.size()}});
            }
        } else if (role == SampleRole::Positive) {
            const std::string token = a.subject_token.empty() ? s.cfg.subject_token : a.subject_token;
            plan = positive_prompts(tree, token, limit);
        } else {
            plan = negative_prompts(tree, role, limit, s.cfg.seed);
        }
    }
    write_file_atomic(a.out, to_jsonl(plan));
    s.log.info("prompts_planned", {{"out", a.out}, {"role", to_string(role)}, {"count", plan.size()}});
}

struct GenerateArgs {
    std::string plan;
    std::string mode;
    std::string out;
};

void generate_cmd(Session& s, const GenerateArgs& a) {
    const auto plan = prompt_plan_from_jsonl(read_input(a.plan));
    std::optional<GenerationMode> forced;
    if (!a.mode.empty()) {
        forced = generation_mode_from_string(a.mode);
    }
    std::vector<GeneratedSample> samples(plan.size());
    parallel_for(plan.size(), s.cfg.threads, [&](std::size_t i) {
        GeneratedSample& g = samples[i];
        g.spec = plan[i];
        g.mode = forced.value_or(default_mode(plan[i].role));
        g.generation_seed = generation_seed(s.cfg.seed, plan[i]);
        g.image = s.image().generate_image(plan[i].text, g.mode, g.generation_seed);
    });
    write_file_atomic(a.out, to_jsonl(samples));
    s.log.info("images_generated", {{"out", a.out}, {"count", samples.size()}, {"store", s.cfg.store.string()}});
}

struct FilterArgs {
    std::string samples;
    std::string role;
    std::optional<double> tau;
    std::string report;
    std::vector<std::string> references;
};

void filter_cmd(Session& s, const FilterArgs& a) {
    const auto samples = samples_from_jsonl(read_input(a.samples));
    std::optional<SampleRole> role;
    if (!a.role.empty()) {
        role = sample_role_from_string(a.role);
    }
    for (const auto& g : samples) {
        if (!role) {
            role = g.spec.role;
        }
        if (g.spec.role != *role) {
            fail(ErrorCode::Precondition, "sample " + g.image.address + " has role " +
                                              std::string(to_string(g.spec.role)) + ", expected " +
                                              std::string(to_string(*role)));
        }
    }
    if (!role) {
        fail(ErrorCode::EmptyInput, "no samples to filter in " + a.samples);
    }
    const double tau = a.tau.value_or(threshold_for(s.cfg, *role));
    if (std::isnan(tau)) {
        fail(ErrorCode::Config, "threshold must be a number");
    }
    std::vector<FilterReportLine> report;
    if (*role == SampleRole::EasyNegative) {
        std::vector<PromptedSample> prompted;
        for (const auto& g : samples) {
            prompted.push_back({g.image, g.spec.text});
        }
        auto [kept, rejected] = filter_easy_negative(prompted, s.encoder(), tau, s.cfg.threads);
        std::map<std::string, TextImageRecord> by_address;
        for (auto* part : {&kept, &rejected}) {
            for (auto& r : *part) {
                by_address.emplace(r.sample.address, std::move(r));
            }
        }
        for (const auto& g : samples) {
            report.push_back(report_line(g, by_address.at(g.image.address)));
        }
    } else {
        const auto refs = ingest_all(*s.store, a.references);
        if (refs.empty()) {
            fail(ErrorCode::Precondition, "PCS filtering needs --references (the user's concept images)");
        }
        std::vector<ImageRef> images;
        for (const auto& g : samples) {
            images.push_back(g.image);
        }
        auto records =
            pcs_score_batch(images, refs, s.encoder(), perturb_for(s.cfg), *s.store, tau, s.cfg.threads);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            report.push_back(report_line(samples[i], records[i]));
        }
    }
    const std::size_t kept = static_cast<std::size_t>(
        std::count_if(report.begin(), report.end(), [](const FilterReportLine& l) { return l.kept; }));
    write_file_atomic(report_file(a.report), to_jsonl(report));
    s.log.info("filtered", {{"report", report_file(a.report).string()},
                            {"role", to_string(*role)},
                            {"tau", tau},
                            {"kept", kept},
                            {"rejected", report.size() - kept}});
}

struct DiversityArgs {
    std::vector<std::string> inputs;
    std::optional<std::size_t> k;
    std::string out;
    std::string table;
    std::vector<std::string> categories;
    bool raw = false;
};

std::vector<Vector> load_vectors(Session& s, const std::string& path) {
    const std::string text = read_input(path);
    const auto first = text.substr(0, text.find('\n'));
    std::vector<Vector> out;
    if (first.find("\"values\"") != std::string::npos) {
        for (auto& e : embeddings_from_jsonl(text)) {
            out.push_back(std::move(e.vector.values));
        }
    } else {
        for (const auto& g : samples_from_jsonl(text)) {
            out.push_back(s.encoder().embed_image(g.image).values);
        }
    }
    return out;
}

void diversity_cmd(Session& s, const DiversityArgs& a) {
    if (!a.categories.empty() && a.categories.size() != a.inputs.size()) {
        fail(ErrorCode::Config, "--category must be given once per input");
    }
    const std::uint64_t seed = s.cfg.diversity_seed.value_or(s.cfg.seed);
    const std::optional<std::size_t> k = a.k ? a.k : s.cfg.diversity_k;
    std::string lines;
    std::vector<EditDiversityRow> rows;
    for (std::size_t i = 0; i < a.inputs.size(); ++i) {
        const auto vectors = load_vectors(s, a.inputs[i]);
        const auto report =
            diversity_score(vectors, k ? std::optional(std::min(*k, vectors.size())) : std::nullopt, seed, !a.raw);
        Json j = Json::parse(to_json_line(report));
        j["input"] = a.inputs[i];
        lines += j.dump() + "\n";
        s.log.info("diversity", {{"input", a.inputs[i]}, {"k", report.k}, {"score", report.score}});
        if (!a.categories.empty()) {
            const auto& c = a.categories[i];
            const auto colon = c.rfind(':');
            EditDiversityRow row{c, 0, report.score};
            if (colon != std::string::npos) {
                row.category = c.substr(0, colon);
                try {
                    row.times = std::stoul(c.substr(colon + 1));
                } catch (const std::exception&) {
                    fail(ErrorCode::Config, "--category expects NAME:TIMES, got " + c);
                }
            }
            rows.push_back(std::move(row));
        }
    }
    write_file_atomic(a.out, lines);
    if (!a.table.empty()) {
        if (rows.empty()) {
            fail(ErrorCode::Config, "--table needs --category labels");
        }
        write_file_atomic(a.table, render_edit_table(rows));
    }
}

struct AssembleArgs {
    std::vector<std::string> user;
    std::vector<std::string> pos;
    std::vector<std::string> easy;
    std::vector<std::string> hard;
    std::string out;
    std::optional<std::size_t> pairs;
    std::string concept_id;
};

std::vector<FilterReportLine> kept_lines(const std::vector<std::string>& args, SampleRole role,
                                         std::set<std::string>& sources) {
    std::vector<FilterReportLine> out;
    for (const auto& a : args) {
        for (auto& line : report_from_jsonl(read_input(report_file(a).string()))) {
            if (line.role != role) {
                fail(ErrorCode::Precondition, report_file(a).string() + " holds " +
                                                  std::string(to_string(line.role)) + " records, expected " +
                                                  std::string(to_string(role)));
            }
            if (line.kept) {
                sources.insert(line.source_tree);
                out.push_back(std::move(line));
            }
        }
    }
    return out;
}

void assemble_cmd(Session& s, const AssembleArgs& a) {
    const std::string id = a.concept_id.empty() ? s.cfg.concept_id : a.concept_id;
    const std::size_t n_pairs = a.pairs.value_or(s.cfg.instruction_pairs);
    std::set<std::string> sources;
    auto to_entries = [&](const std::vector<std::string>& args, SampleRole role) {
        std::vector<DatasetEntry> entries;
        for (const auto& line : kept_lines(args, role, sources)) {
            entries.push_back(synthetic_entry(line, id));
        }
        return entries;
    };
    std::vector<DatasetEntry> user;
    for (const auto& ref : ingest_all(*s.store, a.user)) {
        user.push_back(user_entry(ref, id));
    }
    auto pos = to_entries(a.pos, SampleRole::Positive);
    auto easy = to_entries(a.easy, SampleRole::EasyNegative);
    auto hard = to_entries(a.hard, SampleRole::HardNegative);

    std::string source_list;
    for (const auto& src : sources) {
        source_list += (source_list.empty() ? "" : ",") + src;
    }
    const PerturbConfig perturb = perturb_for(s.cfg);
    std::map<std::string, std::string> config{
        {"concept_id", id},
        {"seed", std::to_string(s.cfg.seed)},
        {"source_trees", source_list},
        {"tau_positive", number_text(s.cfg.thresholds.positive)},
        {"tau_hard_negative", number_text(s.cfg.thresholds.hard_negative)},
        {"tau_text", number_text(s.cfg.thresholds.text)},
        {"patch_size", std::to_string(perturb.patch_size)},
        {"perturb_mode", std::string(to_string(perturb.mode))},
        {"perturb_seed", std::to_string(perturb.seed)},
        {"shuffle_fraction", number_text(perturb.shuffle_fraction)},
        {"instruction_pairs", std::to_string(n_pairs)},
    };
    // validate the union before spending any backend calls on it
    assemble(user, pos, easy, hard, config);
    if (n_pairs > 0) {
        for (auto* part : {&user, &pos, &easy, &hard}) {
            *part = generate_instruction_pairs(std::move(*part), s.chat(), n_pairs, id, s.cfg.threads);
        }
    }
    const DatasetManifest manifest = assemble(user, pos, easy, hard, config);
    write_manifest(manifest, a.out);
    OrderedJson counts(manifest.counts);
    s.log.info("assembled", {{"out", a.out},
                             {"entries", manifest.entries.size()},
                             {"counts", counts},
                             {"config_digest", manifest.config_digest}});
}

struct ReportArgs {
    std::vector<std::string> inputs;
    std::string out;
};

void report_cmd(Session& s, const ReportArgs& a) {
    std::map<SampleRole, std::vector<double>> by_role;
    for (const auto& in : a.inputs) {
        for (const auto& line : report_from_jsonl(read_input(report_file(in).string()))) {
            if (line.pcs) {
                by_role[line.role].push_back(*line.pcs);
            }
        }
    }
    if (by_role.empty()) {
        fail(ErrorCode::EmptyInput, "no PCS records in the given reports");
    }
    const fs::path dir(a.out);
    std::vector<PCSHistogram> histograms;
    std::string jsonl;
    for (const auto& [role, values] : by_role) {
        histograms.push_back(pcs_histogram(values, std::string(to_string(role))));
        const auto& h = histograms.back();
        write_file_atomic(dir / ("histogram_" + h.role + ".csv"), histogram_csv(h));
        jsonl += to_json_line(h) + "\n";
    }
    write_file_atomic(dir / "histograms.jsonl", jsonl);
    write_file_atomic(dir / "bands.txt", band_table(histograms));
    s.log.info("report_written", {{"out", a.out}, {"roles", histograms.size()}});
}

} // namespace

// ---- config ---------------------------------------------------------------

void PipelineConfig::validate() const {
    for (auto [name, v] : {std::pair{"thresholds.positive", thresholds.positive},
                           std::pair{"thresholds.hard_negative", thresholds.hard_negative},
                           std::pair{"thresholds.text", thresholds.text}}) {
        if (!std::isfinite(v)) {
            config_error(name, "threshold must be finite");
        }
    }
    if (perturb.patch_size < 1) {
        config_error("perturb.patch_size", "must be >= 1");
    }
    if (!(perturb.shuffle_fraction >= 0.0 && perturb.shuffle_fraction <= 1.0)) {
        config_error("perturb.fraction", "must lie in [0, 1]");
    }
    if (threads < 1) {
        config_error("threads", "must be >= 1");
    }
    if (store.empty()) {
        config_error("store", "must name a directory");
    }
    if (diversity_k && *diversity_k < 1) {
        config_error("diversity.k", "must be >= 1");
    }
    if (builder.vote_rounds < 1 || builder.vote_quorum < 1 || builder.vote_quorum > builder.vote_rounds) {
        config_error("builder", "need 1 <= vote_quorum <= vote_rounds");
    }
    if (builder.refine_max_iters < 0 || builder.description_retries < 0) {
        config_error("builder", "iteration and retry counts must be >= 0");
    }
    if (fs::exists(store) && !fs::is_directory(store)) {
        config_error("store", store.string() + " exists and is not a directory");
    }
}

PipelineConfig parse_config(std::string_view document) {
    Json j;
    try {
        j = Json::parse(document.begin(), document.end());
    } catch (const Json::parse_error& e) {
        config_error("config", std::string("malformed JSON: ") + e.what());
    }
    PipelineConfig c;
    Section top(j, "",
                {"seed", "store", "threads", "mock", "fixtures", "concept_id", "subject_token", "instruction_pairs",
                 "backends", "thresholds", "perturb", "diversity", "plan", "builder"});
    top.read("seed", c.seed);
    top.read("store", c.store);
    top.read("threads", c.threads);
    top.read("mock", c.mock);
    top.read("fixtures", c.fixtures);
    top.read("concept_id", c.concept_id);
    top.read("subject_token", c.subject_token);
    top.read("instruction_pairs", c.instruction_pairs);
    if (top.has("backends")) {
        Section b(top.at("backends"), "backends", {"chat", "vlm", "image", "embed"});
        if (b.has("chat")) {
            c.chat = backend_from(b.at("chat"), "backends.chat");
        }
        if (b.has("vlm")) {
            c.vlm = backend_from(b.at("vlm"), "backends.vlm");
        }
        if (b.has("image")) {
            c.image = backend_from(b.at("image"), "backends.image");
        }
        if (b.has("embed")) {
            c.embed = backend_from(b.at("embed"), "backends.embed");
        }
    }
    if (top.has("thresholds")) {
        Section t(top.at("thresholds"), "thresholds", {"positive", "hard_negative", "text"});
        t.read("positive", c.thresholds.positive);
        t.read("hard_negative", c.thresholds.hard_negative);
        t.read("text", c.thresholds.text);
    }
    if (top.has("perturb")) {
        Section p(top.at("perturb"), "perturb", {"patch_size", "mode", "fraction", "seed"});
        p.read("patch_size", c.perturb.patch_size);
        p.read("fraction", c.perturb.shuffle_fraction);
        p.read("seed", c.perturb_seed);
        std::string mode;
        p.read("mode", mode);
        if (!mode.empty()) {
            auto m = perturb_mode_from_string(mode);
            if (!m) {
                config_error("perturb.mode", "expected shuffle_self or mix_with_reference");
            }
            c.perturb.mode = *m;
        }
    }
    if (top.has("diversity")) {
        Section d(top.at("diversity"), "diversity", {"k", "seed"});
        d.read("k", c.diversity_k);
        d.read("seed", c.diversity_seed);
    }
    if (top.has("plan")) {
        Section p(top.at("plan"), "plan", {"positive", "easy_negative", "hard_negative"});
        p.read("positive", c.plan.positive);
        p.read("easy_negative", c.plan.easy_negative);
        p.read("hard_negative", c.plan.hard_negative);
    }
    if (top.has("builder")) {
        Section b(top.at("builder"), "builder", {"vote_rounds", "vote_quorum", "refine_max_iters", "description_retries"});
        b.read("vote_rounds", c.builder.vote_rounds);
        b.read("vote_quorum", c.builder.vote_quorum);
        b.read("refine_max_iters", c.builder.refine_max_iters);
        b.read("description_retries", c.builder.description_retries);
    }
    c.validate();
    return c;
}

PipelineConfig load_config(const fs::path& path) {
    if (!fs::is_regular_file(path)) {
        config_error("--config", "no such file: " + path.string());
    }
    return parse_config(read_file(path));
}

int exit_code(ErrorFamily family) noexcept {
    switch (family) {
    case ErrorFamily::Config: return 2;
    case ErrorFamily::Backend: return 3;
    case ErrorFamily::Validation: return 4;
    case ErrorFamily::Io: return 5;
    }
    return 1;
}

// ---- entry point ------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& log_stream) {
    Log log(log_stream);
    CLI::App app{"Concept-tree driven synthetic data pipeline for personalised vision-language models", "catsynth"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    bool mock = false;
    std::string fixtures;
    std::uint64_t seed = 0;
    std::string store;
    std::size_t threads = 0;
    app.add_option("--config", config_path, "JSON pipeline config");
    app.add_flag("--mock", mock, "use the deterministic offline backends");
    app.add_option("--fixtures", fixtures, "chat fixture file for --mock");
    auto* seed_opt = app.add_option("--seed", seed, "global seed (overrides the config)");
    app.add_option("--store", store, "content store directory");
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

    const std::vector<std::string> roles{"positive", "easy_negative", "hard_negative", "easy", "hard"};

    BuildTreeArgs bt;
    auto* build = app.add_subcommand("build-tree", "build a concept tree from reference images");
    build->add_option("images", bt.images, "image files or directories")->required();
    build->add_option("--out", bt.out, "output tree document")->required();
    build->add_option("--concept-id", bt.concept_id, "id of the new tree");

    EditTreeArgs et;
    auto* edit = app.add_subcommand("edit-tree", "derive a hard-negative tree by editing dimensions");
    edit->add_option("tree", et.tree, "input tree document")->required();
    edit->add_option("--op", et.op, "add, remove or modify")->required()->check(CLI::IsMember({"add", "remove", "modify"}));
    edit->add_option("--times", et.times, "number of dimensions to edit")->default_val(1);
    edit->add_option("--out", et.out, "output tree document")->required();

    EasyTreeArgs ez;
    auto* easy = app.add_subcommand("easy-tree", "derive an easy-negative tree with a different class");
    easy->add_option("tree", ez.tree, "input tree document")->required();
    easy->add_option("--out", ez.out, "output tree document")->required();

    GenPromptsArgs gp;
    auto* prompts = app.add_subcommand("gen-prompts", "write a prompt plan from a tree or forest");
    prompts->add_option("input", gp.input, "tree or forest document")->required();
    prompts->add_option("--role", gp.role, "sample role")->required()->check(CLI::IsMember(roles));
    prompts->add_option("--limit", gp.limit, "number of prompts (default: the config plan size)");
    prompts->add_option("--out", gp.out, "output plan (JSONL)")->required();
    prompts->add_option("--subject-token", gp.subject_token, "identifier of the personalised subject");
    prompts->add_flag("--from-llm", gp.from_llm, "ask the chat backend to write the prompts");

    GenerateArgs ga;
    auto* generate = app.add_subcommand("generate", "render every prompt of a plan into the content store");
    generate->add_option("plan", ga.plan, "prompt plan (JSONL)")->required();
    generate->add_option("--mode", ga.mode, "finetuned or base (default: finetuned for positives)")
        ->check(CLI::IsMember({"finetuned", "base"}));
    generate->add_option("--out", ga.out, "output sample list (JSONL)")->required();

    FilterArgs fa;
    auto* filter = app.add_subcommand("filter", "score samples and keep those above the role's threshold");
    filter->add_option("samples", fa.samples, "sample list (JSONL)")->required();
    filter->add_option("--role", fa.role, "sample role (default: taken from the samples)")->check(CLI::IsMember(roles));
    filter->add_option("--tau", fa.tau, "threshold override");
    filter->add_option("--report", fa.report, "output report (JSONL, or a directory for pcs.jsonl)")->required();
    filter->add_option("--references", fa.references, "the user's concept images (files or directories)");

    DiversityArgs da;
    auto* diversity = app.add_subcommand("diversity", "k-means diversity score of embedding or sample sets");
    diversity->add_option("inputs", da.inputs, "embedding files or sample lists (JSONL)")->required();
    diversity->add_option("--k", da.k, "cluster count (default min(8, ceil(n/10), n))")->check(CLI::PositiveNumber);
    diversity->add_option("--out", da.out, "output report (JSONL)")->required();
    diversity->add_option("--table", da.table, "also write a Category/Times/Diversity table");
    diversity->add_option("--category", da.categories, "NAME:TIMES label per input, for --table");
    diversity->add_flag("--raw", da.raw, "skip L2 normalisation");

    AssembleArgs aa;
    auto* assemble_sub = app.add_subcommand("assemble", "assemble the training manifest");
    assemble_sub->add_option("--user", aa.user, "user images (files or directories)")->required();
    assemble_sub->add_option("--pos", aa.pos, "positive filter reports (files or directories)");
    assemble_sub->add_option("--easy", aa.easy, "easy-negative filter reports");
    assemble_sub->add_option("--hard", aa.hard, "hard-negative filter reports");
    assemble_sub->add_option("--out", aa.out, "output manifest")->required();
    assemble_sub->add_option("--pairs", aa.pairs, "instruction pairs per image (default: config)");
    assemble_sub->add_option("--concept-id", aa.concept_id, "concept id recorded on every entry");

    ReportArgs ra;
    auto* report = app.add_subcommand("report", "PCS histograms and band table from filter reports");
    report->add_option("inputs", ra.inputs, "filter reports")->required();
    report->add_option("--out", ra.out, "output directory")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, std::cout, log_stream);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, std::cout, log_stream);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, std::cout, log_stream);
    } catch (const CLI::ParseError& e) {
        log.error("usage", {{"message", e.what()}});
        return exit_code(ErrorFamily::Config);
    }

    try {
        PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : load_config(config_path);
        cfg.mock = cfg.mock || mock;
        if (!fixtures.empty()) {
            cfg.fixtures = fixtures;
        }
        if (seed_opt->count() > 0) {
            cfg.seed = seed;
        }
        if (!store.empty()) {
            cfg.store = store;
        }
        if (threads > 0) {
            cfg.threads = threads;
        }
        cfg.validate();
        if (!cfg.fixtures.empty() && !cfg.mock) {
            log.warn("fixtures_ignored", {{"reason", "--fixtures only applies with --mock"}});
        }

        Backends needs;
        needs.chat = app.got_subcommand(build) || app.got_subcommand(edit) || app.got_subcommand(easy) ||
                     (app.got_subcommand(prompts) && gp.from_llm) ||
                     (app.got_subcommand(assemble_sub) && aa.pairs.value_or(cfg.instruction_pairs) > 0);
        needs.vlm = app.got_subcommand(build);
        needs.image = app.got_subcommand(generate);
        needs.embed = app.got_subcommand(filter) || app.got_subcommand(diversity);
        Session session(cfg, log, needs);

        const std::string name = app.get_subcommands().front()->get_name();
        log.info("start", {{"command", name}, {"seed", cfg.seed}, {"mock", cfg.mock}});
        if (app.got_subcommand(build)) {
            build_tree_cmd(session, bt);
        } else if (app.got_subcommand(edit)) {
            if (et.times < 1) {
                fail(ErrorCode::Config, "--times must be >= 1");
            }
            edit_tree_cmd(session, et);
        } else if (app.got_subcommand(easy)) {
            easy_tree_cmd(session, ez);
        } else if (app.got_subcommand(prompts)) {
            gen_prompts_cmd(session, gp);
        } else if (app.got_subcommand(generate)) {
            generate_cmd(session, ga);
        } else if (app.got_subcommand(filter)) {
            filter_cmd(session, fa);
        } else if (app.got_subcommand(diversity)) {
            diversity_cmd(session, da);
        } else if (app.got_subcommand(assemble_sub)) {
            assemble_cmd(session, aa);
        } else if (app.got_subcommand(report)) {
            report_cmd(session, ra);
        }
        log.info("done", {{"command", name}});
        return 0;
    } catch (const Error& e) {
        const int code = exit_code(family(e.code()));
        log.error("failed", {{"code", to_string(e.code())}, {"exit", code}, {"message", e.what()}});
        return code;
    } catch (const fs::filesystem_error& e) {
        log.error("failed", {{"code", "Io"}, {"exit", 5}, {"message", e.what()}});
        return 5;
    } catch (const std::exception& e) {
        log.error("failed", {{"code", "Internal"}, {"exit", 1}, {"message", e.what()}});
        return 1;
    }
}

} // namespace catsynth::cli
