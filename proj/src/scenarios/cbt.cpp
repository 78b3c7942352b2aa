#include <algorithm>
#include <sstream>

#include "ck/scenarios.hpp"
#include "json.hpp"

namespace ck {

namespace {

using nlohmann::json;

constexpr const char* SESSION_TYPE = "Session";
constexpr const char* OUTCOME_CLASSIFIER = "session_outcome";

std::string join(const std::vector<std::string>& parts, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace

CbtScript parse_cbt_script(const std::string& jsonl) {
    CbtScript script;
    bool have_targets = false;
    for (const auto& raw : split(jsonl, '\n')) {
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        json j = json::parse(line);
        if (j.contains("targets")) {
            script.targets = j["targets"].get<std::vector<std::string>>();
            have_targets = true;
            continue;
        }
        CbtEvent ev;
        if (j.contains("speaker")) ev.speaker = j["speaker"].get<std::string>();
        if (j.contains("tags"))
            for (const auto& t : j["tags"]) ev.tags.push_back(Literal::parse(t.get<std::string>()));
        if (j.contains("confirm")) ev.confirm = j["confirm"].get<std::vector<std::string>>();
        if (j.contains("deny")) ev.deny = j["deny"].get<std::vector<std::string>>();
        if (j.contains("end")) ev.end_reason = j["end"].get<std::string>();
        script.events.push_back(std::move(ev));
    }
    if (!have_targets)
        raise(Err::UnknownTag, "session script declares no target classifiers");
    return script;
}

namespace {

// Session context the engine predicts from: confirmed values, client tags,
// exclusions as negative literals.
std::set<Literal> session_context(const SessionState& state, const std::set<Literal>& tag_context) {
    std::set<Literal> ctx = tag_context;
    for (const auto& [c, v] : state.confirmed) ctx.insert({c, v, false});
    for (const auto& [c, cats] : state.excluded)
        for (const auto& v : cats) ctx.insert({c, v, true});
    return ctx;
}

// Top non-excluded categories for a target, by combined rank; rule-backed only.
std::vector<Id> ranked_candidates(const Cdb& db, const SessionState& state,
                                  const std::set<Literal>& ctx, const Id& target) {
    std::vector<Id> out;
    auto forecasts = rank(predict(db, ctx, target), RankMode::Combined);
    auto excluded = state.excluded.find(target);
    for (const auto& f : forecasts) {
        if (f.prior_only()) continue;
        if (excluded != state.excluded.end() && excluded->second.count(f.target.category)) continue;
        out.push_back(f.target.category);
    }
    return out;
}

}  // namespace

CbtResult run_cbt_session(Cdb& db, const CbtScript& script, double w_min) {
    const Schema& schema = db.schema();
    for (const auto& t : script.targets) schema.classifier(t);

    SessionState state;

    // prefer mined session history once enough diagnosed sessions exist
    RecordFilter prior_sessions;
    prior_sessions.type = SESSION_TYPE;
    std::size_t n_sessions = db.query_records(prior_sessions).size();
    if (static_cast<double>(n_sessions) >= w_min) {
        MineParams mp;
        mp.max_premise = 2;
        mp.w_min = w_min;
        for (const auto& rule : mine_rules(db, script.targets, mp, Id(SESSION_TYPE)))
            db.upsert_rule(rule);
        state.used_history = true;
    }

    std::set<Literal> tag_context;
    CbtResult result;

    for (const auto& ev : script.events) {
        std::vector<std::string> said;

        if (ev.end_reason) {
            state.failure_reason = *ev.end_reason;
            state.transcript.push_back("C: [session ends: " + *ev.end_reason + "]");
            result.turns.push_back(state);
            break;
        }

        // denials: exclude the standing tentative, context loses the literal
        for (const auto& c : ev.deny) {
            auto it = state.tentative.find(c);
            if (it == state.tentative.end()) continue;
            state.excluded[c].insert(it->second);
            tag_context.erase({c, it->second, false});
            said.push_back("denies " + c + "=" + it->second);
            state.tentative.erase(it);
        }

        // client tags: direct evidence, sets the tentative for target classifiers
        std::set<Id> tagged_now;
        for (const auto& tag : ev.tags) {
            if (!schema.literal_valid(tag))
                raise(Err::UnknownTag, "tag '" + tag.str() + "' is not in the pack vocabulary");
            if (tag.negated) {
                state.excluded[tag.classifier].insert(tag.category);
                tag_context.erase(tag.negation());
                tag_context.insert(tag);
                continue;
            }
            tag_context.insert(tag);
            said.push_back("#" + tag.category);
            bool is_target = std::find(script.targets.begin(), script.targets.end(),
                                       tag.classifier) != script.targets.end();
            if (is_target && !state.confirmed.count(tag.classifier)) {
                state.tentative[tag.classifier] = tag.category;
                tagged_now.insert(tag.classifier);
            }
        }

        // confirmations promote tentative -> confirmed
        for (const auto& c : ev.confirm) {
            auto it = state.tentative.find(c);
            if (it != state.tentative.end()) {
                state.confirmed[c] = it->second;
                said.push_back("confirms " + c + "=" + it->second);
            }
        }

        state.transcript.push_back("C: " + (said.empty() ? "(no diagnostic content)" : join(said, ", ")));

        // fill tentatives for still-open targets from ranked forecasts
        std::set<Literal> ctx = session_context(state, tag_context);
        for (const auto& c : script.targets) {
            if (state.confirmed.count(c) || tagged_now.count(c)) continue;
            auto ranked = ranked_candidates(db, state, ctx, c);
            if (!ranked.empty()) state.tentative[c] = ranked.front();
        }

        // engine side: clarify the first unresolved target
        for (const auto& c : script.targets) {
            if (state.confirmed.count(c)) continue;
            auto ranked = ranked_candidates(db, state, ctx, c);
            std::ostringstream line;
            line << "P: clarifying " << c;
            if (state.tentative.count(c)) {
                line << " (#" << state.tentative[c];
                if (ranked.size() > 1 && ranked[1] != state.tentative[c]) line << " or #" << ranked[1];
                line << ")";
            }
            state.transcript.push_back(line.str());
            break;
        }

        result.turns.push_back(state);
    }

    state.diagnosed = true;
    for (const auto& c : script.targets)
        if (!state.confirmed.count(c)) {
            state.diagnosed = false;
            break;
        }
    if (state.diagnosed) {
        for (const auto& c : script.targets) state.diagnosis.push_back({c, state.confirmed[c], false});
    } else if (state.failure_reason.empty()) {
        state.failure_reason = "no_problem_found";
    }

    // log the session precedent
    if (schema.find_type(SESSION_TYPE)) {
        ObjectRecord rec;
        char buf[24];
        std::snprintf(buf, sizeof buf, "session-%06zu", n_sessions + 1);
        rec.id = buf;
        rec.type = SESSION_TYPE;
        Timestamp t = static_cast<Timestamp>(n_sessions);
        rec.span = {t, t};
        for (const auto& [c, v] : state.confirmed) rec.attrs[c] = v;
        if (schema.find_classifier(OUTCOME_CLASSIFIER))
            rec.attrs[OUTCOME_CLASSIFIER] = state.diagnosed ? "diagnosed" : state.failure_reason;
        db.put_record(std::move(rec));
    }

    result.final_state = std::move(state);
    return result;
}

}  // namespace ck
