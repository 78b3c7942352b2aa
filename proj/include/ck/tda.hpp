// Task-driven success oracle: declarative success functions over DOB
// records, evaluated on completion triggers, emitting external rewards
// into the functional-systems loop.
#pragma once

#include "ck/tfs.hpp"

namespace ck {

class Oracle {
public:
    explicit Oracle(Cdb& db) : db_(db) {}

    // Registered with the schema so success criteria persist with the MDB.
    Id register_success_function(SuccessFunction spec);

    // Deterministic: success_when contained in the record's literals yields
    // reward_success, else reward_failure; aggregate functions average the
    // recursively evaluated part-of children.
    double evaluate(const ObjectRecord& record) const;

    // Delivers external rewards to every acted task whose subject is the
    // triggering event; idempotent per (event, task) pair.
    std::vector<std::pair<Id, double>> on_trigger(const ObjectRecord& event, TaskEngine& engine,
                                                  const std::vector<Task*>& open_tasks);

private:
    Cdb& db_;
    std::set<std::pair<Id, Id>> delivered_;  // (event id, task id)
};

}  // namespace ck
