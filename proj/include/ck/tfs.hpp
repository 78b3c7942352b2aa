// Functional-systems loop: tasks with an acceptor image of the expected
// result, action selection over LPI forecasts, outcome acceptance and
// reinforcement feedback into the rule base.
#pragma once

#include <random>
#include <set>

#include "ck/lpi.hpp"

namespace ck {

enum class TaskStatus { Formed, Acted, Evaluated };

const char* task_status_name(TaskStatus s);

struct Task {
    Id id;
    std::vector<Literal> goal;
    std::set<Literal> context;
    std::vector<Literal> candidates;  // action literals
    // Expected-result image fixed at formation: per candidate, the goal
    // forecasts under context + that action.
    std::vector<std::vector<Forecast>> acceptor;
    std::optional<Literal> chosen;
    // Forecasts the choice was made on; their support set receives the
    // reinforcement.
    std::vector<Forecast> chosen_forecasts;
    std::set<Literal> observed;
    double reward = 0.0;
    TaskStatus status = TaskStatus::Formed;
    std::optional<Id> subject_id;     // DOB record the goal concerns
    std::optional<Id> success_fn;
    Id record_id;                     // Process record logging the episode
};

struct SelectParams {
    double epsilon = 0.1;
    double confidence_threshold = 0.6;
    // Evidence floor for automatic decisions: the winning forecast must be
    // backed by at least this much pooled weight, else the engine only
    // recommends. 0 disables the floor.
    double min_auto_weight = 0.0;
};

struct Recommendation {
    Literal action;
    double score;
};

struct SelectOutcome {
    bool chose = false;
    Literal action;                        // meaningful when chose
    bool explored = false;                 // epsilon branch taken
    std::vector<Recommendation> ranking;   // combined-score order
};

// Episodes are strictly sequential; the engine owns the single RB writer
// path and a seeded generator, so identical seeds replay identically.
class TaskEngine {
public:
    TaskEngine(Cdb& db, std::uint64_t seed);

    Task form_task(const std::vector<Literal>& goal, const std::set<Literal>& context,
                   const std::vector<Literal>& candidates, std::optional<Id> subject = {},
                   std::optional<Id> success_fn = {});

    // Epsilon branch picks uniformly; otherwise the combined-score argmax is
    // chosen when it clears the confidence threshold, else the ranking is
    // returned and the task stays formed.
    SelectOutcome select_action(Task& task, const SelectParams& params = {});

    // Manual (or externally decided) choice; records the decision forecasts.
    void choose(Task& task, const Literal& action);

    // Internal reward is +1 when the goal is contained in the observed set,
    // else -1; an explicit external reward overrides it.
    void accept_result(Task& task, const std::set<Literal>& observed,
                       std::optional<double> external_reward = {});

    // Revises every rule supporting the chosen forecasts by (|r|,|r|) for
    // positive reward, (0,|r|) for negative; returns the updated rule ids.
    std::vector<Id> reinforce(const Task& task);

    struct ReinforcementEvent {
        Id rule;
        double dw_pos;
        double dw;
        Id task;
    };
    const std::vector<ReinforcementEvent>& ledger() const { return ledger_; }

private:
    std::vector<Forecast> goal_forecasts(const Task& task, const Literal& action) const;
    double action_score(const std::vector<Forecast>& forecasts) const;
    void log_episode(Task& task);
    void log_outcome(const Task& task);

    Cdb& db_;
    std::mt19937_64 rng_;
    std::uint64_t next_task_ = 1;
    std::uint64_t clock_ = 0;  // logical time for episode records
    std::vector<ReinforcementEvent> ledger_;
};

}  // namespace ck
