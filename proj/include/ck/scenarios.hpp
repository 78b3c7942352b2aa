// Domain packs and scripted scenario runners: therapy-session diagnosis,
// customer segmentation with offer forecasting, project-assignment
// reinforcement episodes, and the touch-recognition demo.
#pragma once

#include <map>
#include <random>

#include "ck/pfc.hpp"
#include "ck/tda.hpp"

namespace ck {

// ---------------------------------------------------------------------------
// Packs

struct DomainPack {
    std::string name;
    std::string dir;
    Schema schema;
    std::vector<Rule> prior_rules;
};

// Reads <dir>/meta.schema plus optional <dir>/rules.jsonl priors.
DomainPack load_pack(const std::string& dir);
Cdb make_db(const DomainPack& pack);
std::string read_text_file(const std::string& path);
std::string pack_fixture_path(const DomainPack& pack, const std::string& name);

// ---------------------------------------------------------------------------
// CBT session diagnostics

struct CbtEvent {
    std::string speaker = "client";
    std::vector<Literal> tags;
    std::vector<Id> confirm;  // classifiers whose tentative value is confirmed
    std::vector<Id> deny;     // classifiers whose tentative value is denied
    std::optional<std::string> end_reason;
};

struct CbtScript {
    std::vector<Id> targets;  // diagnosis classifiers, resolution order
    std::vector<CbtEvent> events;
};

CbtScript parse_cbt_script(const std::string& jsonl);

struct SessionState {
    std::map<Id, Id> confirmed;
    std::map<Id, std::set<Id>> excluded;
    std::map<Id, Id> tentative;
    std::vector<std::string> transcript;
    bool diagnosed = false;
    std::vector<Literal> diagnosis;
    std::string failure_reason;
    bool used_history = false;  // mined session history vs pack priors
};

struct CbtResult {
    std::vector<SessionState> turns;  // state snapshot after every event
    SessionState final_state;
};

// Deterministic engine policy: targets resolve in script order; client tags
// set tentatives directly, ranked forecasts fill the rest; confirmation
// promotes tentative -> confirmed, denial excludes it and promotes the next
// ranked category. The finished session is logged as a Process record.
CbtResult run_cbt_session(Cdb& db, const CbtScript& script, double w_min = 5.0);

// ---------------------------------------------------------------------------
// CRM segmentation

struct CrmTemplate {
    std::string name;
    std::map<Id, Id> attrs;  // classifier -> category
    std::map<std::string, std::pair<double, double>> numeric;  // attr -> [lo,hi]
};

struct CrmFixture {
    std::vector<Id> context;  // classifiers the segmentation runs over
    std::vector<CrmTemplate> templates;
};

CrmFixture parse_crm_templates(const std::string& json_text);

struct CrmGenParams {
    std::uint64_t seed = 1;
    int n_objects = 500;
    std::vector<double> mix;  // one weight per template, sums to 1
    double noise_rate = 0.05;
    std::string id_prefix = "client";
};

struct CrmPopulation {
    std::vector<ObjectRecord> records;
    std::vector<int> origin;  // generating template per record
};

// Each object is drawn from a template; every attribute is independently
// corrupted (unset or flipped to another category) with noise_rate.
CrmPopulation generate_crm_population(const Schema& schema, const Id& client_type,
                                      const std::vector<CrmTemplate>& templates,
                                      const CrmGenParams& params);

struct CrmParams {
    CrmGenParams gen;
    std::vector<Id> context;  // segmentation classifiers (fixture-provided)
    double theta = 0.9;
    double w_min = 5.0;
    double alpha = 0.05;
    int min_extent = 2;
    int n_holdout = 20;
    int offers_per_client = 2;
    // planted acceptance probability per (template name, product)
    std::map<std::string, std::map<Id, double>> acceptance;
};

struct HoldoutForecast {
    Id client;
    Id concept_id;  // empty when unassigned
    Id product;
    double p_hat;
    double p_value;
    bool prior_only;
};

struct CrmResult {
    std::vector<Concept> concepts;
    Id composite_classifier;
    std::map<std::string, Id> template_to_concept;
    std::map<std::string, double> intent_match;  // recovered fraction of template literals
    double assign_accuracy = 0.0;
    std::vector<HoldoutForecast> holdout;
    std::string render() const;
};

// Ingests the population, discovers concepts, derives the composite
// classifier, generates planted offer precedents, mines offer rules and
// forecasts subscriptions for held-out clients.
CrmResult run_crm_pipeline(Cdb& db, const std::vector<CrmTemplate>& templates,
                           const CrmParams& params);

// ---------------------------------------------------------------------------
// PM assignment episodes

struct PmPlanted {
    std::vector<Id> task_types;
    std::vector<Id> assignees;
    std::map<Id, std::map<Id, double>> success;  // type -> assignee -> P(success)
};

PmPlanted parse_pm_planted(const std::string& json_text);

struct PmParams {
    PmParams() {
        mining.max_premise = 1;     // assignee within each task type
        mining.w_min = 3.0;         // admit hypotheses early, re-mining prunes
        mining.alpha = 0.5;         // plausible-hypothesis supply; automatic
                                    // decisions stay gated by the confidence
                                    // threshold on p_hat * (1 - p_value)
        mining.bonferroni = false;
    }
    std::uint64_t seed = 7;
    int episodes = 200;
    double epsilon = 0.1;
    double confidence_threshold = 0.65;
    double min_auto_weight = 12.0;  // evidence floor for automatic decisions
    double manager_optimism = 0.9;  // exploration weight of the fallback pick
    int mine_every = 5;
    int trailing_window = 50;
    MineParams mining;
};

struct PmEpisode {
    Id task_id;
    Id task_type;
    Id assignee;     // executed action
    Id recommended;  // top of the system's ranking this episode
    bool auto_chosen;
    bool explored;
    bool success;
    double reward;
};

struct PmReport {
    std::vector<PmEpisode> episodes;
    std::map<Id, Id> modal_choice;  // per task type over the trailing window
    std::map<Id, Id> planted_argmax;
    bool converged = false;
    bool audit_ok = false;  // rule truths reconcile with mining + reinforcement
    std::string render() const;
};

// form_task -> select_action -> sampled outcome -> success trigger ->
// accept_result -> reinforce, with batch re-mining every mine_every episodes.
PmReport run_pm_episodes(Cdb& db, const PmPlanted& planted, const PmParams& params);

// ---------------------------------------------------------------------------
// Fruit demo

struct FruitHypothesis {
    Id category;
    double p_hat;
    double p_value;
    double score;
    bool prior_only;
    std::vector<Literal> supporting;     // context literals behind this hypothesis
    std::vector<Literal> contradicting;  // context literals behind competitors
};

struct FruitReport {
    std::vector<FruitHypothesis> ranking;  // combined order
    std::string render() const;
};

FruitReport run_fruit_demo(const Cdb& db, const std::set<Literal>& context);

}  // namespace ck
