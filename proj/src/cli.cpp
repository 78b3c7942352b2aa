#include "ck/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "ck/scenarios.hpp"
#include "json.hpp"

#ifndef CK_DEFAULT_PACK_DIR
#define CK_DEFAULT_PACK_DIR "packs"
#endif

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace ck::cli {

namespace {

// ---------------------------------------------------------------------------
// Store lock: one writer per store directory.

class StoreLock {
public:
    explicit StoreLock(const std::string& db_dir) {
        std::error_code ec;
        fs::create_directories(db_dir, ec);
        if (ec) raise(Err::IoFailure, "cannot create '" + db_dir + "': " + ec.message());
        path_ = (fs::path(db_dir) / "LOCK").string();
        int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0)
            raise(Err::StoreLocked, "store '" + db_dir + "' is locked by another process");
        ::close(fd);
        held_ = true;
    }
    ~StoreLock() {
        if (held_) ::unlink(path_.c_str());
    }
    StoreLock(const StoreLock&) = delete;
    StoreLock& operator=(const StoreLock&) = delete;

private:
    std::string path_;
    bool held_ = false;
};

// ---------------------------------------------------------------------------
// Run manifest. The canonical manifest is fully deterministic; wall time
// goes to a separate sidecar so identical runs yield identical bytes.

struct Manifest {
    std::vector<std::string> command;
    std::map<std::string, std::string> params;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> outputs;

    void add_input(const std::string& path) { inputs[fs::path(path).filename().string()] = digest(path); }
    void add_output(const std::string& path) { outputs[fs::path(path).filename().string()] = digest(path); }

    static std::string digest(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) return "missing";
        std::ostringstream buf;
        buf << is.rdbuf();
        return hex64(fnv1a(buf.str()));
    }

    void write(const std::string& db_dir, long long wall_ms) const {
        ordered_json j;
        j["command"] = command;
        j["params"] = ordered_json::object();
        for (const auto& [k, v] : params) j["params"][k] = v;
        j["seed"] = seed;
        j["inputs"] = ordered_json::object();
        for (const auto& [k, v] : inputs) j["inputs"][k] = v;
        j["outputs"] = ordered_json::object();
        for (const auto& [k, v] : outputs) j["outputs"][k] = v;
        std::ofstream m(fs::path(db_dir) / "run.manifest.json", std::ios::binary | std::ios::trunc);
        m << j.dump(2) << "\n";
        std::ofstream t(fs::path(db_dir) / "run.times.txt", std::ios::binary | std::ios::trunc);
        t << "wall_ms " << wall_ms << "\n";
    }
};

void add_store_outputs(Manifest& m, const std::string& db) {
    for (const char* f : {"meta.schema", "objects.jsonl", "invariants.jsonl", "rules.jsonl"})
        m.add_output((fs::path(db) / f).string());
}

bool store_exists(const std::string& db) { return fs::exists(fs::path(db) / "meta.schema"); }

void require_fresh_store(const std::string& db, const std::string& what) {
    if (store_exists(db))
        raise(Err::IdConflict, what + " needs a fresh store; '" + db + "' is already initialized");
}

Cdb open_store(const std::string& db) {
    if (!store_exists(db)) raise(Err::IoFailure, "no store at '" + db + "' (run schema load first)");
    return Cdb::load(db);
}

std::string forecast_table(const std::vector<Forecast>& forecasts) {
    std::ostringstream os;
    os << "category              p_hat   p_value  score   rules\n";
    for (const auto& f : forecasts) {
        std::string name = f.target.category;
        name.resize(20, ' ');
        os << name << "  " << fixed(f.p_hat, 4) << "  " << fixed(f.p_value, 4) << "  "
           << fixed(combined_score(f), 4) << "  " << f.support.size()
           << (f.prior_only() ? " (prior)" : "") << "\n";
    }
    return os.str();
}

void write_forecast_sidecar(const std::string& db, const std::vector<Forecast>& forecasts) {
    ordered_json arr = ordered_json::array();
    for (const auto& f : forecasts) {
        ordered_json j;
        j["category"] = f.target.category;
        j["p_hat"] = f.p_hat;
        j["p_value"] = f.p_value;
        j["score"] = combined_score(f);
        j["support"] = f.support;
        j["prior_only"] = f.prior_only();
        arr.push_back(std::move(j));
    }
    std::ofstream os(fs::path(db) / "forecasts.json", std::ios::binary | std::ios::trunc);
    os << arr.dump(2) << "\n";
}

std::set<Literal> literal_set(const std::string& text) {
    auto lits = parse_literals(text);
    return {lits.begin(), lits.end()};
}

std::vector<std::string> comma_list(const std::string& text) {
    std::vector<std::string> out;
    for (const auto& part : split(text, ',')) {
        std::string t = trim(part);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"cogkern — embeddable cognitive kernel"};
    app.fallthrough();

    std::string db = "ckdb";
    std::uint64_t seed = 7;
    bool quiet = false;
    std::string pack_root = CK_DEFAULT_PACK_DIR;
    app.add_option("--db", db, "store directory")->capture_default_str();
    app.add_option("--seed", seed, "random seed")->capture_default_str();
    app.add_flag("--quiet", quiet, "suppress informational output");
    app.add_option("--pack-dir", pack_root, "scenario pack root")->capture_default_str();

    // schema
    auto* schema_cmd = app.add_subcommand("schema", "schema operations");
    schema_cmd->require_subcommand(1);
    std::string schema_file;
    auto* schema_load = schema_cmd->add_subcommand("load", "initialize a store from a schema file");
    schema_load->add_option("file", schema_file, "schema text file")->required();
    auto* schema_show = schema_cmd->add_subcommand("show", "print the stored schema");

    // ingest
    std::string ingest_file;
    auto* ingest = app.add_subcommand("ingest", "load object records from a jsonl file");
    ingest->add_option("file", ingest_file, "objects jsonl")->required();

    // mine
    std::string mine_targets, mine_type;
    int mine_max_premise = 3;
    double mine_support = 5.0, mine_alpha = 0.05;
    bool mine_no_bonferroni = false, mine_negatives = false;
    auto* mine = app.add_subcommand("mine", "mine significance-filtered rules");
    mine->add_option("--targets", mine_targets, "target classifiers, comma separated")->required();
    mine->add_option("--type", mine_type, "restrict to records of this type");
    mine->add_option("--max-premise", mine_max_premise, "premise size limit")->capture_default_str();
    mine->add_option("--min-support", mine_support, "minimum support count")->capture_default_str();
    mine->add_option("--alpha", mine_alpha, "significance level")->capture_default_str();
    mine->add_flag("--no-bonferroni", mine_no_bonferroni, "disable the per-target correction");
    mine->add_flag("--negatives", mine_negatives, "admit negative premise literals");

    // concepts
    std::string concepts_classifiers, concepts_type, concepts_derive;
    double concepts_theta = 0.9, concepts_support = 5.0, concepts_alpha = 0.05;
    int concepts_min_extent = 2, concepts_max_premise = 1;
    auto* concepts = app.add_subcommand("concepts", "discover probabilistic formal concepts");
    concepts->add_option("--classifiers", concepts_classifiers, "context classifiers, comma separated")
        ->required();
    concepts->add_option("--type", concepts_type, "restrict to records of this type");
    concepts->add_option("--theta", concepts_theta, "closure firing threshold")->capture_default_str();
    concepts->add_option("--min-extent", concepts_min_extent, "smallest emitted extent")
        ->capture_default_str();
    concepts->add_option("--min-support", concepts_support, "mining support")->capture_default_str();
    concepts->add_option("--alpha", concepts_alpha, "mining significance level")->capture_default_str();
    concepts->add_option("--max-premise", concepts_max_premise, "mining premise size")
        ->capture_default_str();
    concepts->add_option("--derive", concepts_derive, "register a composite classifier");

    // predict
    std::string predict_context, predict_target, predict_rank = "probability";
    auto* predict_cmd = app.add_subcommand("predict", "forecast a classifier from context literals");
    predict_cmd->add_option("--context", predict_context, "comma-separated literals")->required();
    predict_cmd->add_option("--target", predict_target, "target classifier")->required();
    predict_cmd->add_option("--rank", predict_rank, "probability|significance|combined")
        ->capture_default_str();

    // evaluate-all
    auto* evaluate_all = app.add_subcommand("evaluate-all", "run every success function over the store");

    // scenario
    auto* scenario = app.add_subcommand("scenario", "run a packaged scenario");
    scenario->require_subcommand(1);
    std::string cbt_script;
    auto* sc_cbt = scenario->add_subcommand("cbt", "scripted therapy session diagnosis");
    sc_cbt->add_option("--script", cbt_script, "session script (defaults to the pack fixture)");

    int crm_n = 500, crm_holdout = 20, crm_min_extent = 2, crm_offers = 2;
    std::string crm_mix = "0.6,0.4";
    double crm_noise = 0.05, crm_theta = 0.9;
    auto* sc_crm = scenario->add_subcommand("crm", "synthetic segmentation and offer forecasts");
    sc_crm->add_option("--n", crm_n, "population size")->capture_default_str();
    sc_crm->add_option("--mix", crm_mix, "template mix weights")->capture_default_str();
    sc_crm->add_option("--noise", crm_noise, "attribute noise rate")->capture_default_str();
    sc_crm->add_option("--theta", crm_theta, "closure firing threshold")->capture_default_str();
    sc_crm->add_option("--min-extent", crm_min_extent, "smallest emitted extent")->capture_default_str();
    sc_crm->add_option("--holdout", crm_holdout, "held-out clients to forecast")->capture_default_str();
    sc_crm->add_option("--offers", crm_offers, "offers per client")->capture_default_str();

    int pm_episodes = 200, pm_mine_every = 5, pm_window = 50;
    double pm_epsilon = 0.1, pm_threshold = 0.65, pm_floor = 12.0;
    auto* sc_pm = scenario->add_subcommand("pm", "project-assignment reinforcement episodes");
    sc_pm->add_option("--episodes", pm_episodes, "episode count")->capture_default_str();
    sc_pm->add_option("--epsilon", pm_epsilon, "exploration rate")->capture_default_str();
    sc_pm->add_option("--threshold", pm_threshold, "confidence threshold")->capture_default_str();
    sc_pm->add_option("--auto-weight", pm_floor, "evidence floor for automatic choices")
        ->capture_default_str();
    sc_pm->add_option("--mine-every", pm_mine_every, "re-mining period")->capture_default_str();
    sc_pm->add_option("--window", pm_window, "trailing report window")->capture_default_str();

    bool fruit_heavy = false;
    std::string fruit_context;
    auto* sc_fruit = scenario->add_subcommand("fruit", "touch-recognition ranking demo");
    sc_fruit->add_flag("--heavy", fruit_heavy, "perceive a heavy object instead of a light one");
    sc_fruit->add_option("--context", fruit_context, "override the perceived literals");

    // export
    auto* export_cmd = app.add_subcommand("export", "write rules or concepts to a file");
    export_cmd->require_subcommand(1);
    std::string export_rules_file, export_concepts_file;
    auto* export_rules = export_cmd->add_subcommand("rules", "human-readable rule text");
    export_rules->add_option("file", export_rules_file, "output path")->required();
    auto* export_concepts = export_cmd->add_subcommand("concepts", "invariant records as jsonl");
    export_concepts->add_option("file", export_concepts_file, "output path")->required();

    app.require_subcommand(1);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    auto started = std::chrono::steady_clock::now();
    Manifest manifest;
    manifest.command = args;
    manifest.seed = seed;
    manifest.params = {{"db", db}, {"seed", std::to_string(seed)}};

    try {
        StoreLock lock(db);

        if (*schema_load) {
            require_fresh_store(db, "schema load");
            manifest.add_input(schema_file);
            Cdb store(Schema::from_text(read_text_file(schema_file)));
            store.persist(db);
            if (!quiet)
                out << "schema loaded: " << store.schema().classifier_order().size()
                    << " classifiers, " << store.schema().type_order().size() << " types\n";
        } else if (*schema_show) {
            out << open_store(db).schema().to_text();
        } else if (*ingest) {
            Cdb store = open_store(db);
            manifest.add_input(ingest_file);
            manifest.params["file"] = fs::path(ingest_file).filename().string();
            std::vector<ObjectRecord> batch;
            for (const auto& line : split(read_text_file(ingest_file), '\n')) {
                std::string t = trim(line);
                if (t.empty() || t[0] == '#') continue;
                batch.push_back(record_from_json(t));
            }
            freeze_quantile_bins(store.schema(), batch);
            for (auto& rec : batch) {
                apply_binning(rec, store.schema());
                store.put_record(rec);
            }
            store.persist(db);
            if (!quiet) out << "ingested " << batch.size() << " records\n";
        } else if (*mine) {
            Cdb store = open_store(db);
            MineParams mp;
            mp.max_premise = mine_max_premise;
            mp.w_min = mine_support;
            mp.alpha = mine_alpha;
            mp.bonferroni = !mine_no_bonferroni;
            mp.negative_premises = mine_negatives;
            manifest.params["targets"] = mine_targets;
            manifest.params["max_premise"] = std::to_string(mp.max_premise);
            manifest.params["min_support"] = fixed(mp.w_min, 4);
            manifest.params["alpha"] = fixed(mp.alpha, 4);
            manifest.params["bonferroni"] = mp.bonferroni ? "on" : "off";
            std::optional<Id> type;
            if (!mine_type.empty()) type = mine_type;
            auto rules = mine_rules(store, comma_list(mine_targets), mp, type);
            for (const auto& r : rules) store.upsert_rule(r);
            store.persist(db);
            if (!quiet) {
                out << "mined " << rules.size() << " rules\n";
                for (const auto& r : rules) out << r.text() << "\n";
            }
        } else if (*concepts) {
            Cdb store = open_store(db);
            RecordFilter filter;
            if (!concepts_type.empty()) filter.type = concepts_type;
            FormalContext context =
                build_context(store.query_records(filter), comma_list(concepts_classifiers),
                              store.schema());
            ConceptParams cp;
            cp.theta = concepts_theta;
            cp.w_min = concepts_support;
            cp.alpha = concepts_alpha;
            cp.min_extent = concepts_min_extent;
            cp.max_premise = concepts_max_premise;
            manifest.params["classifiers"] = concepts_classifiers;
            manifest.params["theta"] = fixed(cp.theta, 4);
            manifest.params["min_extent"] = std::to_string(cp.min_extent);
            auto discovery = find_concepts(context, cp);
            store_concepts(store, discovery);
            if (!concepts_derive.empty())
                derive_composite_classifier(store, discovery.concepts, concepts_derive);
            store.persist(db);
            if (!quiet) {
                out << "discovered " << discovery.concepts.size() << " concepts ("
                    << discovery.rules.size() << " closure rules)\n";
                for (const auto& c : discovery.concepts)
                    out << "  " << c.id << "  extent=" << c.extent.size()
                        << "  intent=" << c.intent.size() << "\n";
            }
        } else if (*predict_cmd) {
            Cdb store = open_store(db);
            auto mode = rank_mode_from_name(predict_rank);
            if (!mode) raise(Err::UsageError, "unknown rank mode '" + predict_rank + "'");
            manifest.params["context"] = predict_context;
            manifest.params["target"] = predict_target;
            manifest.params["rank"] = predict_rank;
            auto forecasts = rank(predict(store, literal_set(predict_context), predict_target), *mode);
            out << forecast_table(forecasts);
            write_forecast_sidecar(db, forecasts);
            manifest.add_output((fs::path(db) / "forecasts.json").string());
        } else if (*evaluate_all) {
            Cdb store = open_store(db);
            Oracle oracle(store);
            for (const auto& fn : store.schema().success_functions()) {
                RecordFilter filter;
                filter.type = fn.applies_to;
                for (const auto& rec : store.query_records(filter))
                    out << rec.id << "  " << fixed(oracle.evaluate(rec), 4) << "\n";
            }
        } else if (*sc_cbt) {
            DomainPack pack = load_pack((fs::path(pack_root) / "cbt").string());
            Cdb store = store_exists(db) ? Cdb::load(db) : make_db(pack);
            std::string script_path =
                cbt_script.empty() ? pack_fixture_path(pack, "fig4_session.jsonl") : cbt_script;
            manifest.add_input(script_path);
            CbtScript script = parse_cbt_script(read_text_file(script_path));
            CbtResult result = run_cbt_session(store, script);
            store.persist(db);
            for (const auto& line : result.final_state.transcript) out << line << "\n";
            if (result.final_state.diagnosed) {
                out << "diagnosis:";
                for (const auto& lit : result.final_state.diagnosis) out << " " << lit.str();
                out << "\n";
            } else {
                out << "failure: " << result.final_state.failure_reason << "\n";
            }
            manifest.params["script"] = fs::path(script_path).filename().string();
            manifest.params["rules"] =
                result.final_state.used_history ? "mined-history" : "pack-priors";
        } else if (*sc_crm) {
            require_fresh_store(db, "scenario crm");
            DomainPack pack = load_pack((fs::path(pack_root) / "crm").string());
            Cdb store = make_db(pack);
            std::string tpl_path = pack_fixture_path(pack, "templates.json");
            std::string offers_path = pack_fixture_path(pack, "offers.json");
            manifest.add_input(tpl_path);
            manifest.add_input(offers_path);
            auto fixture = parse_crm_templates(read_text_file(tpl_path));

            CrmParams cp;
            cp.context = fixture.context;
            cp.gen.seed = seed;
            cp.gen.n_objects = crm_n;
            for (const auto& m : comma_list(crm_mix)) cp.gen.mix.push_back(std::stod(m));
            cp.gen.noise_rate = crm_noise;
            cp.theta = crm_theta;
            cp.min_extent = crm_min_extent;
            cp.n_holdout = crm_holdout;
            cp.offers_per_client = crm_offers;
            nlohmann::json acc = nlohmann::json::parse(read_text_file(offers_path));
            for (const auto& [tname, row] : acc.items())
                for (const auto& [product, p] : row.items())
                    cp.acceptance[tname][product] = p.get<double>();

            manifest.params["n"] = std::to_string(crm_n);
            manifest.params["mix"] = crm_mix;
            manifest.params["noise"] = fixed(crm_noise, 4);
            manifest.params["theta"] = fixed(crm_theta, 4);
            CrmResult result = run_crm_pipeline(store, fixture.templates, cp);
            store.persist(db);
            out << result.render();
        } else if (*sc_pm) {
            require_fresh_store(db, "scenario pm");
            DomainPack pack = load_pack((fs::path(pack_root) / "pm").string());
            Cdb store = make_db(pack);
            std::string planted_path = pack_fixture_path(pack, "planted.json");
            manifest.add_input(planted_path);
            PmPlanted planted = parse_pm_planted(read_text_file(planted_path));
            PmParams pp;
            pp.seed = seed;
            pp.episodes = pm_episodes;
            pp.epsilon = pm_epsilon;
            pp.confidence_threshold = pm_threshold;
            pp.min_auto_weight = pm_floor;
            pp.mine_every = pm_mine_every;
            pp.trailing_window = pm_window;
            manifest.params["episodes"] = std::to_string(pm_episodes);
            manifest.params["epsilon"] = fixed(pm_epsilon, 4);
            manifest.params["threshold"] = fixed(pm_threshold, 4);
            manifest.params["mine_every"] = std::to_string(pm_mine_every);
            PmReport report = run_pm_episodes(store, planted, pp);
            store.persist(db);
            out << report.render();
        } else if (*sc_fruit) {
            DomainPack pack = load_pack((fs::path(pack_root) / "fruit").string());
            Cdb store = make_db(pack);
            std::set<Literal> context;
            if (!fruit_context.empty()) {
                context = literal_set(fruit_context);
            } else {
                std::string fixture = pack_fixture_path(pack, "perceived.jsonl");
                manifest.add_input(fixture);
                const std::string wanted = fruit_heavy ? "heavy" : "default";
                for (const auto& line : split(read_text_file(fixture), '\n')) {
                    std::string t = trim(line);
                    if (t.empty()) continue;
                    auto j = nlohmann::json::parse(t);
                    if (j.at("name").get<std::string>() != wanted) continue;
                    for (const auto& lit : j.at("context"))
                        context.insert(Literal::parse(lit.get<std::string>()));
                }
                if (context.empty())
                    raise(Err::IoFailure, "fixture lacks the '" + wanted + "' context");
            }
            manifest.params["heavy"] = fruit_heavy ? "yes" : "no";
            FruitReport report = run_fruit_demo(store, context);
            store.persist(db);
            out << report.render();
        } else if (*export_rules) {
            Cdb store = open_store(db);
            std::ofstream os(export_rules_file, std::ios::binary | std::ios::trunc);
            if (!os) raise(Err::IoFailure, "cannot write '" + export_rules_file + "'");
            for (const auto& rule : store.query_rules({}, {})) os << rule.text() << "\n";
            os.flush();
            manifest.add_output(export_rules_file);
            if (!quiet) out << "exported " << store.rule_count() << " rules\n";
        } else if (*export_concepts) {
            Cdb store = open_store(db);
            std::ofstream os(export_concepts_file, std::ios::binary | std::ios::trunc);
            if (!os) raise(Err::IoFailure, "cannot write '" + export_concepts_file + "'");
            for (const auto& inv : store.query_invariants()) os << to_jsonl(inv) << "\n";
            os.flush();
            manifest.add_output(export_concepts_file);
            if (!quiet) out << "exported " << store.invariant_count() << " concepts\n";
        }

        if (store_exists(db)) add_store_outputs(manifest, db);
        auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - started)
                           .count();
        manifest.write(db, elapsed);
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace ck::cli
