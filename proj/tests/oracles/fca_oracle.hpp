// Brute-force formal concept analysis over small contexts: derivation
// operators computed by direct scans, closures by the double prime, and
// the full intent set by enumerating every attribute subset.
#pragma once

#include <cstdint>
#include <set>
#include <vector>

namespace oracle {

struct FcaOracle {
    // incidence[g][m], objects x attributes, both <= ~16
    std::vector<std::vector<bool>> incidence;

    std::size_t objects() const { return incidence.size(); }
    std::size_t attributes() const { return incidence.empty() ? 0 : incidence[0].size(); }

    // objects having every attribute in the mask
    std::uint32_t extent_of(std::uint32_t attr_mask) const {
        std::uint32_t ext = 0;
        for (std::size_t g = 0; g < objects(); ++g) {
            bool all = true;
            for (std::size_t m = 0; m < attributes(); ++m)
                if ((attr_mask >> m) & 1u)
                    if (!incidence[g][m]) {
                        all = false;
                        break;
                    }
            if (all) ext |= (1u << g);
        }
        return ext;
    }

    // attributes common to every object in the mask
    std::uint32_t intent_of(std::uint32_t obj_mask) const {
        std::uint32_t intent = (1u << attributes()) - 1u;
        for (std::size_t g = 0; g < objects(); ++g)
            if ((obj_mask >> g) & 1u) {
                std::uint32_t row = 0;
                for (std::size_t m = 0; m < attributes(); ++m)
                    if (incidence[g][m]) row |= (1u << m);
                intent &= row;
            }
        return intent;
    }

    std::uint32_t closure(std::uint32_t attr_mask) const { return intent_of(extent_of(attr_mask)); }

    std::uint32_t object_row(std::size_t g) const {
        std::uint32_t row = 0;
        for (std::size_t m = 0; m < attributes(); ++m)
            if (incidence[g][m]) row |= (1u << m);
        return row;
    }

    // all concept intents, by closing every attribute subset
    std::set<std::uint32_t> all_intents() const {
        std::set<std::uint32_t> intents;
        std::uint32_t full = (1u << attributes());
        for (std::uint32_t mask = 0; mask < full; ++mask) intents.insert(closure(mask));
        return intents;
    }
};

}  // namespace oracle
