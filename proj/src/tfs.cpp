#include "ck/tfs.hpp"

#include <algorithm>
#include <sstream>

namespace ck {

const char* task_status_name(TaskStatus s) {
    switch (s) {
        case TaskStatus::Formed: return "formed";
        case TaskStatus::Acted: return "acted";
        case TaskStatus::Evaluated: return "evaluated";
    }
    return "formed";
}

namespace {

constexpr const char* EPISODE_TYPE = "tfs_episode";
constexpr const char* OUTCOME_TYPE = "tfs_outcome";

std::string literal_list(const std::vector<Literal>& lits) {
    std::string out;
    for (std::size_t i = 0; i < lits.size(); ++i) {
        if (i) out += ',';
        out += lits[i].str();
    }
    return out;
}

std::string literal_list(const std::set<Literal>& lits) {
    return literal_list(std::vector<Literal>(lits.begin(), lits.end()));
}

}  // namespace

TaskEngine::TaskEngine(Cdb& db, std::uint64_t seed) : db_(db), rng_(seed) {
    // episode log types are part of the engine's contract with the store
    Schema& schema = db_.schema();
    if (!schema.find_type(EPISODE_TYPE)) {
        schema.define_type(EPISODE_TYPE, TypeKind::Process,
                           {{"goal", ValueKind::Text, "", false},
                            {"context", ValueKind::Text, "", false},
                            {"chosen", ValueKind::Text, "", false},
                            {"observed", ValueKind::Text, "", false},
                            {"status", ValueKind::Text, "", false},
                            {"reward", ValueKind::Numeric, "", false}});
    }
    if (!schema.find_type(OUTCOME_TYPE)) {
        schema.define_type(OUTCOME_TYPE, TypeKind::Event,
                           {{"task", ValueKind::Text, "", false},
                            {"observed", ValueKind::Text, "", false},
                            {"reward", ValueKind::Numeric, "", false}});
    }
}

std::vector<Forecast> TaskEngine::goal_forecasts(const Task& task, const Literal& action) const {
    std::set<Literal> ctx = task.context;
    ctx.insert(action);
    std::vector<Forecast> out;
    std::set<Id> goal_classifiers;
    for (const auto& g : task.goal) goal_classifiers.insert(g.classifier);
    for (const auto& cls : goal_classifiers) {
        for (auto& f : predict(db_, ctx, cls)) {
            for (const auto& g : task.goal)
                if (f.target == g) out.push_back(f);
        }
    }
    return out;
}

double TaskEngine::action_score(const std::vector<Forecast>& forecasts) const {
    double score = 1.0;
    for (const auto& f : forecasts) score *= combined_score(f);
    return forecasts.empty() ? 0.0 : score;
}

Task TaskEngine::form_task(const std::vector<Literal>& goal, const std::set<Literal>& context,
                           const std::vector<Literal>& candidates, std::optional<Id> subject,
                           std::optional<Id> success_fn) {
    if (candidates.empty()) raise(Err::EmptyCandidates, "a task needs at least one candidate action");
    if (goal.empty()) raise(Err::UnknownGoal, "a task needs at least one goal literal");
    for (const auto& g : goal) {
        if (!db_.schema().find_classifier(g.classifier))
            raise(Err::UnknownGoal, "goal classifier '" + g.classifier + "' is not declared");
        db_.schema().require_literal(g);
    }
    for (const auto& lit : context) db_.schema().require_literal(lit);

    Task task;
    char buf[24];
    std::snprintf(buf, sizeof buf, "task-%06llu", static_cast<unsigned long long>(next_task_++));
    task.id = buf;
    task.goal = goal;
    task.context = context;
    task.candidates = candidates;
    task.subject_id = std::move(subject);
    task.success_fn = std::move(success_fn);
    for (const auto& action : candidates) task.acceptor.push_back(goal_forecasts(task, action));
    log_episode(task);
    return task;
}

void TaskEngine::log_episode(Task& task) {
    ObjectRecord rec;
    rec.id = task.id;
    rec.type = EPISODE_TYPE;
    Timestamp t = static_cast<Timestamp>(clock_++);
    rec.span = {t, t};
    rec.text["goal"] = literal_list(task.goal);
    rec.text["context"] = literal_list(task.context);
    rec.text["status"] = task_status_name(task.status);
    if (task.subject_id) rec.links.emplace_back("subject", *task.subject_id);
    task.record_id = db_.put_record(std::move(rec));
}

SelectOutcome TaskEngine::select_action(Task& task, const SelectParams& params) {
    if (task.status != TaskStatus::Formed)
        raise(Err::InvalidStatus, "select_action requires a formed task");

    SelectOutcome outcome;
    for (const auto& action : task.candidates)
        outcome.ranking.push_back({action, action_score(goal_forecasts(task, action))});
    std::stable_sort(outcome.ranking.begin(), outcome.ranking.end(),
                     [](const Recommendation& a, const Recommendation& b) {
                         if (a.score != b.score) return a.score > b.score;
                         return a.action < b.action;
                     });

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double u = unit(rng_);
    if (u < params.epsilon) {
        std::uniform_int_distribution<std::size_t> pick(0, task.candidates.size() - 1);
        outcome.chose = true;
        outcome.explored = true;
        outcome.action = task.candidates[pick(rng_)];
        choose(task, outcome.action);
        return outcome;
    }

    if (!outcome.ranking.empty() && outcome.ranking.front().score >= params.confidence_threshold) {
        bool enough_evidence = true;
        if (params.min_auto_weight > 0.0) {
            for (const auto& f : goal_forecasts(task, outcome.ranking.front().action))
                if (f.pooled.w < params.min_auto_weight) enough_evidence = false;
        }
        if (enough_evidence) {
            outcome.chose = true;
            outcome.action = outcome.ranking.front().action;
            choose(task, outcome.action);
        }
    }
    return outcome;  // below threshold: recommendation list, task stays formed
}

void TaskEngine::choose(Task& task, const Literal& action) {
    if (task.status != TaskStatus::Formed)
        raise(Err::InvalidStatus, "choose requires a formed task");
    if (std::find(task.candidates.begin(), task.candidates.end(), action) == task.candidates.end())
        raise(Err::UsageError, "action '" + action.str() + "' is not a candidate");
    task.chosen = action;
    task.chosen_forecasts = goal_forecasts(task, action);
    task.status = TaskStatus::Acted;
}

void TaskEngine::accept_result(Task& task, const std::set<Literal>& observed,
                               std::optional<double> external_reward) {
    if (task.status != TaskStatus::Acted)
        raise(Err::InvalidStatus, "accept_result requires an acted task");
    if (external_reward && (*external_reward < -1.0 || *external_reward > 1.0))
        raise(Err::RewardOutOfRange, "external reward must lie in [-1,1]");

    bool achieved = true;
    for (const auto& g : task.goal)
        if (!observed.count(g)) {
            achieved = false;
            break;
        }
    double internal = achieved ? 1.0 : -1.0;
    task.reward = external_reward.value_or(internal);
    task.observed = observed;
    task.status = TaskStatus::Evaluated;
    log_outcome(task);
}

void TaskEngine::log_outcome(const Task& task) {
    ObjectRecord rec;
    rec.id = task.id + "-outcome";
    rec.type = OUTCOME_TYPE;
    rec.ts = static_cast<Timestamp>(clock_++);
    rec.text["task"] = task.id;
    rec.text["observed"] = literal_list(task.observed);
    rec.raw["reward"] = task.reward;
    db_.put_record(std::move(rec));
}

std::vector<Id> TaskEngine::reinforce(const Task& task) {
    if (task.status != TaskStatus::Evaluated)
        raise(Err::InvalidStatus, "reinforce requires an evaluated task");
    if (task.reward == 0.0) return {};

    std::set<Id> support;
    for (const auto& f : task.chosen_forecasts)
        for (const auto& rid : f.support) support.insert(rid);

    double magnitude = std::abs(task.reward);
    TruthValue increment = task.reward > 0 ? TruthValue{magnitude, magnitude}
                                           : TruthValue{0.0, magnitude};
    std::vector<Id> updated;
    for (const auto& rid : support) {
        const Rule* rule = db_.find_rule(rid);
        if (!rule) continue;
        db_.update_rule_truth(rid, revise(rule->truth, increment), Provenance::Reinforced);
        ledger_.push_back({rid, increment.w_pos, increment.w, task.id});
        updated.push_back(rid);
    }
    return updated;
}

}  // namespace ck
