#include "ck/tda.hpp"

namespace ck {

Id Oracle::register_success_function(SuccessFunction spec) {
    Id id = spec.id;
    db_.schema().register_success_function(std::move(spec));
    return id;
}

double Oracle::evaluate(const ObjectRecord& record) const {
    const SuccessFunction* fn = nullptr;
    for (const auto& candidate : db_.schema().success_functions())
        if (candidate.applies_to == record.type) {
            fn = &candidate;  // first registered wins
            break;
        }
    if (!fn)
        raise(Err::NoApplicableFunction,
              "no success function applies to type '" + record.type + "'");

    if (fn->aggregate_children) {
        std::vector<Id> children = db_.children_of(record.id);
        if (!children.empty()) {
            double sum = 0.0;
            for (const auto& cid : children) sum += evaluate(db_.record(cid));
            return sum / static_cast<double>(children.size());
        }
        // childless process: fall through to its own literal match
    }

    auto lits = record.literals(db_.schema());
    std::set<Literal> held(lits.begin(), lits.end());
    for (const auto& lit : fn->success_when)
        if (!held.count(lit)) return fn->reward_failure;
    return fn->reward_success;
}

std::vector<std::pair<Id, double>> Oracle::on_trigger(const ObjectRecord& event,
                                                      TaskEngine& engine,
                                                      const std::vector<Task*>& open_tasks) {
    std::vector<std::pair<Id, double>> emissions;
    for (Task* task : open_tasks) {
        if (!task || task->status != TaskStatus::Acted) continue;
        if (!task->subject_id || *task->subject_id != event.id) continue;
        if (delivered_.count({event.id, task->id})) continue;

        double reward = evaluate(event);
        auto lits = event.literals(db_.schema());
        engine.accept_result(*task, std::set<Literal>(lits.begin(), lits.end()), reward);
        delivered_.insert({event.id, task->id});
        emissions.emplace_back(task->id, reward);
    }
    return emissions;
}

}  // namespace ck
