#include <filesystem>
#include <fstream>
#include <sstream>

#include "ck/scenarios.hpp"

namespace fs = std::filesystem;

namespace ck {

std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) raise(Err::IoFailure, "cannot read '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

DomainPack load_pack(const std::string& dir) {
    DomainPack pack;
    pack.dir = dir;
    pack.name = fs::path(dir).filename().string();
    pack.schema = Schema::from_text(read_text_file((fs::path(dir) / "meta.schema").string()));

    fs::path rules = fs::path(dir) / "rules.jsonl";
    if (fs::exists(rules)) {
        for (const auto& line : split(read_text_file(rules.string()), '\n')) {
            std::string t = trim(line);
            if (t.empty() || t[0] == '#') continue;
            pack.prior_rules.push_back(rule_from_json(t));
        }
    }
    return pack;
}

Cdb make_db(const DomainPack& pack) {
    Cdb db(pack.schema);
    for (auto rule : pack.prior_rules) {
        rule.provenance = Provenance::Prior;
        db.put_rule(canonicalized(std::move(rule)));
    }
    return db;
}

std::string pack_fixture_path(const DomainPack& pack, const std::string& name) {
    return (fs::path(pack.dir) / "fixtures" / name).string();
}

}  // namespace ck
