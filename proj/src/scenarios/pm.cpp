#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ck/scenarios.hpp"
#include "json.hpp"

namespace ck {

namespace {

using nlohmann::json;

constexpr const char* TASK_TYPE = "TaskRecord";
constexpr const char* TYPE_CLASSIFIER = "task_type";
constexpr const char* ASSIGNEE_CLASSIFIER = "assignee";
constexpr const char* OUTCOME_CLASSIFIER = "outcome";
constexpr const char* STATUS_CLASSIFIER = "status";

}  // namespace

PmPlanted parse_pm_planted(const std::string& json_text) {
    json j = json::parse(json_text);
    PmPlanted out;
    out.task_types = j.at("task_types").get<std::vector<std::string>>();
    out.assignees = j.at("assignees").get<std::vector<std::string>>();
    for (const auto& [tt, row] : j.at("success").items())
        for (const auto& [a, p] : row.items()) out.success[tt][a] = p.get<double>();
    for (const auto& tt : out.task_types)
        for (const auto& a : out.assignees) {
            double p = out.success.at(tt).at(a);
            if (p < 0.0 || p > 1.0)
                raise(Err::UsageError, "planted probability outside [0,1] for " + tt + "/" + a);
        }
    return out;
}

PmReport run_pm_episodes(Cdb& db, const PmPlanted& planted, const PmParams& params) {
    TaskEngine engine(db, params.seed);
    Oracle oracle(db);
    std::mt19937_64 env_rng(params.seed ^ 0x706d656eULL);  // environment stream
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<Literal> candidates;
    for (const auto& a : planted.assignees) candidates.push_back({ASSIGNEE_CLASSIFIER, a, false});

    // reinforcement audit: rule truth must equal its last mined counts plus
    // the logged increments since
    std::map<Id, TruthValue> baseline;
    std::map<Id, TruthValue> accumulated;
    std::size_t ledger_seen = 0;

    PmReport report;
    SelectParams sp;
    sp.epsilon = params.epsilon;
    sp.confidence_threshold = params.confidence_threshold;
    sp.min_auto_weight = params.min_auto_weight;

    for (int ep = 1; ep <= params.episodes; ++ep) {
        // tasks arrive in a steady rotation across types
        const Id& tt = planted.task_types[static_cast<std::size_t>(ep - 1) %
                                          planted.task_types.size()];

        ObjectRecord task_rec;
        char buf[24];
        std::snprintf(buf, sizeof buf, "pm-%06d", ep);
        task_rec.id = buf;
        task_rec.type = TASK_TYPE;
        task_rec.span = {ep, ep};
        task_rec.attrs[TYPE_CLASSIFIER] = tt;
        task_rec.attrs[STATUS_CLASSIFIER] = "open";
        Id task_rec_id = db.put_record(std::move(task_rec));

        Task task = engine.form_task({{OUTCOME_CLASSIFIER, "success", false}},
                                     {{TYPE_CLASSIFIER, tt, false}}, candidates, task_rec_id,
                                     Id("pm_task"));
        SelectOutcome sel = engine.select_action(task, sp);
        if (!sel.chose) {
            // below the confidence threshold the manager picks from the list,
            // optimistically: observed success rate for this task type plus
            // an exploration bonus for rarely-tried assignees
            long long n_type = 0;
            std::vector<std::pair<long long, long long>> counts;  // (successes, tries)
            for (const auto& cand : candidates) {
                RecordFilter f;
                f.type = TASK_TYPE;
                f.literals.push_back({TYPE_CLASSIFIER, tt, false});
                f.literals.push_back({ASSIGNEE_CLASSIFIER, cand.category, false});
                long long tries = 0, wins = 0;
                for (const auto& rec : db.query_records(f)) {
                    auto it = rec.attrs.find(OUTCOME_CLASSIFIER);
                    if (it == rec.attrs.end()) continue;
                    ++tries;
                    if (it->second == "success") ++wins;
                }
                counts.emplace_back(wins, tries);
                n_type += tries;
            }
            std::vector<std::size_t> best;
            double best_bound = -1.0;
            for (std::size_t i = 0; i < counts.size(); ++i) {
                auto [wins, tries] = counts[i];
                double bound = tries == 0
                                   ? std::numeric_limits<double>::infinity()
                                   : static_cast<double>(wins) / static_cast<double>(tries) +
                                         params.manager_optimism *
                                             std::sqrt(std::log(static_cast<double>(n_type + 1)) /
                                                       static_cast<double>(tries));
                if (bound > best_bound) {
                    best_bound = bound;
                    best = {i};
                } else if (bound == best_bound) {
                    best.push_back(i);
                }
            }
            std::uniform_int_distribution<std::size_t> pick(0, best.size() - 1);
            engine.choose(task, candidates[best[pick(env_rng)]]);
        }
        const Literal& action = *task.chosen;

        bool success = unit(env_rng) < planted.success.at(tt).at(action.category);
        db.set_attr(task_rec_id, ASSIGNEE_CLASSIFIER, action.category);
        db.set_attr(task_rec_id, OUTCOME_CLASSIFIER, success ? "success" : "failure");
        db.set_attr(task_rec_id, STATUS_CLASSIFIER, "done");

        oracle.on_trigger(db.record(task_rec_id), engine, {&task});
        engine.reinforce(task);

        const auto& ledger = engine.ledger();
        for (; ledger_seen < ledger.size(); ++ledger_seen) {
            const auto& ev = ledger[ledger_seen];
            accumulated[ev.rule] = revise(accumulated[ev.rule], {ev.dw_pos, ev.dw});
        }

        // an all-zero ranking carries no information: no recommendation then
        const Id recommended = (!sel.ranking.empty() && sel.ranking.front().score > 0.0)
                                   ? sel.ranking.front().action.category
                                   : Id();
        report.episodes.push_back({task.id, tt, action.category, recommended, sel.chose,
                                   sel.explored, success, task.reward});

        if (ep % params.mine_every == 0) {
            // batch re-mine, contextually per task type: assignment rules are
            // mined against the within-type background and carry the type in
            // their premise, so stored counts stay the audited contingencies
            std::vector<Rule> mined;
            for (const auto& type_id : planted.task_types) {
                RecordFilter filter;
                filter.type = TASK_TYPE;
                filter.literals.push_back({TYPE_CLASSIFIER, type_id, false});
                TransactionSet tx =
                    transactions_from_records(db.query_records(filter), db.schema());
                std::vector<Literal> atoms, conclusions;
                for (const auto& a : planted.assignees)
                    atoms.push_back({ASSIGNEE_CLASSIFIER, a, false});
                for (const auto& cat : db.schema().classifier(OUTCOME_CLASSIFIER).categories)
                    conclusions.push_back({OUTCOME_CLASSIFIER, cat.id, false});
                for (auto rule : mine_rules_core(tx, atoms, conclusions, params.mining)) {
                    rule.premise.push_back({Literal{TYPE_CLASSIFIER, type_id, false}});
                    rule = canonicalized(std::move(rule));
                    rule.id = rule_content_id(rule);
                    mined.push_back(std::move(rule));
                }
            }
            std::set<Id> keep;
            for (const auto& rule : mined) keep.insert(rule.id);
            for (const auto& rule : db.all_rules()) {
                if (rule.conclusion.classifier != OUTCOME_CLASSIFIER) continue;
                if (rule.provenance == Provenance::Prior) continue;
                if (!keep.count(rule.id)) {
                    db.remove_rule(rule.id);
                    baseline.erase(rule.id);
                    accumulated.erase(rule.id);
                }
            }
            for (const auto& rule : mined) {
                db.upsert_rule(rule);
                baseline[rule.id] = rule.truth;
                accumulated[rule.id] = {0.0, 0.0};
            }
        }
    }

    // trailing-window modal recommendation per task type
    std::map<Id, std::map<Id, int>> counts;
    std::size_t start = report.episodes.size() > static_cast<std::size_t>(params.trailing_window)
                            ? report.episodes.size() - static_cast<std::size_t>(params.trailing_window)
                            : 0;
    for (std::size_t i = start; i < report.episodes.size(); ++i)
        if (!report.episodes[i].recommended.empty())
            counts[report.episodes[i].task_type][report.episodes[i].recommended]++;
    for (const auto& tt : planted.task_types) {
        int best = 0;  // a type with no recommendations has no modal
        Id modal;
        for (const auto& a : planted.assignees) {
            auto it = counts[tt].find(a);
            int n = it == counts[tt].end() ? 0 : it->second;
            if (n > best) {
                best = n;
                modal = a;
            }
        }
        report.modal_choice[tt] = modal;

        double best_p = -1.0;
        Id argmax;
        for (const auto& a : planted.assignees) {
            double p = planted.success.at(tt).at(a);
            if (p > best_p) {
                best_p = p;
                argmax = a;
            }
        }
        report.planted_argmax[tt] = argmax;
    }
    report.converged = true;
    for (const auto& tt : planted.task_types)
        if (report.modal_choice[tt] != report.planted_argmax[tt]) report.converged = false;

    report.audit_ok = true;
    for (const auto& rule : db.all_rules()) {
        if (rule.conclusion.classifier != OUTCOME_CLASSIFIER) continue;
        auto base_it = baseline.find(rule.id);
        if (base_it == baseline.end()) {
            report.audit_ok = false;
            continue;
        }
        TruthValue expected = base_it->second;
        auto acc_it = accumulated.find(rule.id);
        if (acc_it != accumulated.end()) expected = revise(expected, acc_it->second);
        if (!(expected == rule.truth)) report.audit_ok = false;
    }
    return report;
}

std::string PmReport::render() const {
    std::ostringstream os;
    os << "episodes: " << episodes.size() << "\n";
    long long successes = 0, auto_count = 0;
    for (const auto& e : episodes) {
        if (e.success) ++successes;
        if (e.auto_chosen) ++auto_count;
    }
    os << "successes: " << successes << "  auto-chosen: " << auto_count << "\n";
    for (const auto& [tt, modal] : modal_choice)
        os << "task_type " << tt << ": modal=" << modal << " planted="
           << planted_argmax.at(tt) << (modal == planted_argmax.at(tt) ? "  ok" : "  MISS") << "\n";
    os << "converged: " << (converged ? "yes" : "no") << "\n";
    os << "reinforcement audit: " << (audit_ok ? "ok" : "FAILED") << "\n";
    return os.str();
}

}  // namespace ck
