#include <algorithm>
#include <sstream>

#include "ck/scenarios.hpp"
#include "json.hpp"

namespace ck {

namespace {

using nlohmann::json;

constexpr const char* CLIENT_TYPE = "Client";
constexpr const char* OFFER_TYPE = "OfferEvent";
constexpr const char* IMAGE_CLASSIFIER = "client_image";
constexpr const char* PRODUCT_CLASSIFIER = "offer_product";
constexpr const char* RESPONSE_CLASSIFIER = "offer_response";
constexpr double NUMERIC_NOISE_MAX = 200.0;

}  // namespace

CrmFixture parse_crm_templates(const std::string& json_text) {
    CrmFixture out;
    json root = json::parse(json_text);
    out.context = root.at("context").get<std::vector<std::string>>();
    for (const auto& j : root.at("templates")) {
        CrmTemplate t;
        t.name = j.at("name").get<std::string>();
        for (const auto& [k, v] : j.at("attrs").items()) t.attrs[k] = v.get<std::string>();
        if (j.contains("numeric"))
            for (const auto& [k, v] : j["numeric"].items())
                t.numeric[k] = {v[0].get<double>(), v[1].get<double>()};
        out.templates.push_back(std::move(t));
    }
    return out;
}

CrmPopulation generate_crm_population(const Schema& schema, const Id& client_type,
                                      const std::vector<CrmTemplate>& templates,
                                      const CrmGenParams& params) {
    if (templates.empty()) raise(Err::BadMix, "no templates to draw from");
    if (params.mix.size() != templates.size())
        raise(Err::BadMix, "mix has " + std::to_string(params.mix.size()) + " weights for " +
                               std::to_string(templates.size()) + " templates");
    double sum = 0.0;
    for (double m : params.mix) {
        if (m < 0.0) raise(Err::BadMix, "negative mix weight");
        sum += m;
    }
    if (std::abs(sum - 1.0) > 1e-9) raise(Err::BadMix, "mix weights must sum to 1");
    if (params.noise_rate < 0.0 || params.noise_rate >= 0.5)
        raise(Err::BadMix, "noise_rate must lie in [0, 0.5)");

    std::mt19937_64 rng(params.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    CrmPopulation pop;
    for (int i = 0; i < params.n_objects; ++i) {
        double u = unit(rng);
        std::size_t t_idx = 0;
        double acc = 0.0;
        for (std::size_t t = 0; t < templates.size(); ++t) {
            acc += params.mix[t];
            if (u < acc) {
                t_idx = t;
                break;
            }
            t_idx = t;  // rounding tail goes to the last template
        }
        const CrmTemplate& tmpl = templates[t_idx];

        ObjectRecord rec;
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s-%05d", params.id_prefix.c_str(), i);
        rec.id = buf;
        rec.type = client_type;

        for (const auto& [classifier_id, category] : tmpl.attrs) {
            double n = unit(rng);
            if (n < params.noise_rate) {
                if (unit(rng) < 0.5) continue;  // unset
                const ClassifierDef& c = schema.classifier(classifier_id);
                std::vector<Id> others;
                for (const auto& cat : c.categories)
                    if (cat.id != category) others.push_back(cat.id);
                std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
                rec.attrs[classifier_id] = others[pick(rng)];
            } else {
                rec.attrs[classifier_id] = category;
            }
        }
        for (const auto& [name, range] : tmpl.numeric) {
            double n = unit(rng);
            if (n < params.noise_rate) {
                if (unit(rng) < 0.5) continue;  // unset
                std::uniform_int_distribution<long long> any(0, static_cast<long long>(NUMERIC_NOISE_MAX));
                rec.raw[name] = static_cast<double>(any(rng));
            } else {
                std::uniform_int_distribution<long long> in_range(
                    static_cast<long long>(range.first), static_cast<long long>(range.second));
                rec.raw[name] = static_cast<double>(in_range(rng));
            }
        }
        pop.records.push_back(std::move(rec));
        pop.origin.push_back(static_cast<int>(t_idx));
    }
    return pop;
}

namespace {

// Template as a full literal set: chosen categories plus implied exclusions,
// numeric ranges mapped through their classifier bins.
std::set<Literal> template_literals(const CrmTemplate& tmpl, const Schema& schema,
                                    const Id& client_type) {
    std::set<Literal> out;
    auto add_value = [&](const Id& classifier_id, const Id& category) {
        const ClassifierDef& c = schema.classifier(classifier_id);
        for (const auto& cat : c.categories) out.insert({classifier_id, cat.id, cat.id != category});
    };
    for (const auto& [classifier_id, category] : tmpl.attrs) add_value(classifier_id, category);
    const TypeDef& t = schema.type(client_type);
    for (const auto& [name, range] : tmpl.numeric) {
        const AttributeDef* attr = t.find_attribute(name);
        if (!attr || attr->ref.empty()) continue;
        const ClassifierDef& c = schema.classifier(attr->ref);
        add_value(attr->ref, c.bin((range.first + range.second) / 2.0));
    }
    return out;
}

}  // namespace

CrmResult run_crm_pipeline(Cdb& db, const std::vector<CrmTemplate>& templates,
                           const CrmParams& params) {
    Schema& schema = db.schema();
    CrmResult result;

    // 1. generate and ingest the client population
    CrmPopulation pop = generate_crm_population(schema, CLIENT_TYPE, templates, params.gen);
    for (auto rec : pop.records) {
        apply_binning(rec, schema);
        db.put_record(std::move(rec));
    }

    // 2. concept discovery over the configured segmentation classifiers
    std::vector<Id> classifiers = params.context;
    if (classifiers.empty()) {
        std::set<Id> classifier_set;
        for (const auto& tmpl : templates) {
            for (const auto& [c, v] : tmpl.attrs) classifier_set.insert(c);
            const TypeDef& t = schema.type(CLIENT_TYPE);
            for (const auto& [name, range] : tmpl.numeric)
                if (const AttributeDef* attr = t.find_attribute(name); attr && !attr->ref.empty())
                    classifier_set.insert(attr->ref);
        }
        classifiers.assign(classifier_set.begin(), classifier_set.end());
    }

    RecordFilter clients;
    clients.type = CLIENT_TYPE;
    FormalContext context = build_context(db.query_records(clients), classifiers, schema);

    ConceptParams cp;
    cp.theta = params.theta;
    cp.w_min = params.w_min;
    cp.alpha = params.alpha;
    cp.min_extent = params.min_extent;
    ConceptDiscovery discovery = find_concepts(context, cp);
    store_concepts(db, discovery);
    result.concepts = discovery.concepts;

    // 3. composite classifier labels every client
    result.composite_classifier =
        derive_composite_classifier(db, discovery.concepts, IMAGE_CLASSIFIER);

    // 4. ground-truth comparison
    std::map<std::string, std::set<Literal>> tmpl_lits;
    for (const auto& tmpl : templates)
        tmpl_lits[tmpl.name] = template_literals(tmpl, schema, CLIENT_TYPE);
    for (const auto& tmpl : templates) {
        const auto& T = tmpl_lits[tmpl.name];
        double best = -1.0;
        Id best_id;
        for (const auto& cpt : result.concepts) {
            long long overlap = 0;
            for (const auto& [lit, w] : cpt.intent)
                if (T.count(lit)) ++overlap;
            double frac = T.empty() ? 0.0 : static_cast<double>(overlap) / static_cast<double>(T.size());
            if (frac > best) {
                best = frac;
                best_id = cpt.id;
            }
        }
        result.template_to_concept[tmpl.name] = best_id;
        result.intent_match[tmpl.name] = best;
    }

    long long correct = 0;
    for (std::size_t i = 0; i < pop.records.size(); ++i) {
        const ObjectRecord& stored = db.record(pop.records[i].id);
        auto it = stored.attrs.find(IMAGE_CLASSIFIER);
        const std::string& tmpl_name = templates[static_cast<std::size_t>(pop.origin[i])].name;
        if (it != stored.attrs.end() && it->second == result.template_to_concept[tmpl_name])
            ++correct;
    }
    result.assign_accuracy =
        pop.records.empty() ? 0.0
                            : static_cast<double>(correct) / static_cast<double>(pop.records.size());

    // 5. planted offer precedents conditioned on the discovered image
    {
        AttributeDef attr;
        attr.name = IMAGE_CLASSIFIER;
        attr.kind = ValueKind::ClassifierRef;
        attr.ref = IMAGE_CLASSIFIER;
        schema.extend_type(OFFER_TYPE, attr);
    }
    std::mt19937_64 offer_rng(params.gen.seed ^ 0x6f666665ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const ClassifierDef& products = schema.classifier(PRODUCT_CLASSIFIER);
    Timestamp clock = 0;
    int offer_seq = 0;
    for (std::size_t i = 0; i < pop.records.size(); ++i) {
        const ObjectRecord& client = db.record(pop.records[i].id);
        auto image = client.attrs.find(IMAGE_CLASSIFIER);
        const CrmTemplate& tmpl = templates[static_cast<std::size_t>(pop.origin[i])];
        for (int k = 0; k < params.offers_per_client; ++k) {
            std::uniform_int_distribution<std::size_t> pick(0, products.categories.size() - 1);
            const Id& product = products.categories[pick(offer_rng)].id;
            double p_accept = params.acceptance.at(tmpl.name).at(product);
            bool accepted = unit(offer_rng) < p_accept;

            ObjectRecord offer;
            char buf[24];
            std::snprintf(buf, sizeof buf, "offer-%06d", offer_seq++);
            offer.id = buf;
            offer.type = OFFER_TYPE;
            offer.ts = clock++;
            offer.attrs[PRODUCT_CLASSIFIER] = product;
            offer.attrs[RESPONSE_CLASSIFIER] = accepted ? "accepted" : "rejected";
            if (image != client.attrs.end()) offer.attrs[IMAGE_CLASSIFIER] = image->second;
            offer.links.emplace_back("client", client.id);
            db.put_record(std::move(offer));
        }
    }

    // 6. mine offer-response rules
    MineParams mp;
    mp.w_min = params.w_min;
    mp.alpha = params.alpha;
    for (const auto& rule : mine_rules(db, {RESPONSE_CLASSIFIER}, mp, Id(OFFER_TYPE)))
        db.upsert_rule(rule);

    // 7. forecast subscriptions for fresh held-out clients
    CrmGenParams holdout_gen = params.gen;
    holdout_gen.seed = params.gen.seed ^ 0x686f6c64ULL;
    holdout_gen.n_objects = params.n_holdout;
    holdout_gen.id_prefix = "fresh";
    CrmPopulation holdout = generate_crm_population(schema, CLIENT_TYPE, templates, holdout_gen);
    for (std::size_t i = 0; i < holdout.records.size(); ++i) {
        ObjectRecord rec = holdout.records[i];
        apply_binning(rec, schema);
        Id id = db.put_record(rec);
        auto assignment = assign(db.record(id), result.concepts, schema);
        if (assignment) db.set_attr(id, IMAGE_CLASSIFIER, assignment->concept_id);

        for (const auto& product : products.categories) {
            std::set<Literal> ctx{{PRODUCT_CLASSIFIER, product.id, false}};
            if (assignment) ctx.insert({IMAGE_CLASSIFIER, assignment->concept_id, false});
            for (const auto& f : predict(db, ctx, RESPONSE_CLASSIFIER)) {
                if (f.target.category != "accepted") continue;
                result.holdout.push_back({id, assignment ? assignment->concept_id : Id(),
                                          product.id, f.p_hat, f.p_value, f.prior_only()});
            }
        }
    }
    return result;
}

std::string CrmResult::render() const {
    std::ostringstream os;
    os << "concepts discovered: " << concepts.size() << "\n";
    for (const auto& c : concepts)
        os << "  " << c.id << "  extent=" << c.extent.size() << "  intent=" << c.intent.size()
           << " literals\n";
    for (const auto& [name, cid] : template_to_concept)
        os << "template " << name << " -> " << (cid.empty() ? "(none)" : cid)
           << "  intent match " << fixed(intent_match.at(name), 4) << "\n";
    os << "assign accuracy: " << fixed(assign_accuracy, 4) << "\n";
    os << "holdout forecasts (offer_response=accepted):\n";
    for (const auto& h : holdout)
        os << "  " << h.client << "  " << h.product << "  p=" << fixed(h.p_hat, 4)
           << "  pv=" << fixed(h.p_value, 4) << (h.prior_only ? "  (prior)" : "") << "\n";
    return os.str();
}

}  // namespace ck
