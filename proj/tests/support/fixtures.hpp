#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "labharm/records.hpp"
#include "labharm/synonyms.hpp"
#include "labharm/types.hpp"

namespace fixtures {

inline labharm::SynonymDictionary seed_dictionary() {
    return labharm::SynonymDictionary::load(LABHARM_DATA_DIR "/synonyms.txt");
}

inline labharm::SynonymDictionary dictionary(const std::string& text) {
    std::istringstream in(text);
    return labharm::SynonymDictionary::parse(in);
}

inline labharm::ReferenceRecord record(std::string id, std::string_view test, std::string_view sample,
                                       std::string_view unit, std::vector<std::string> synonyms = {}) {
    labharm::ReferenceRecord r;
    r.id = std::move(id);
    r.triad = labharm::Triad(test, sample, unit);
    r.labcode = "1-1";
    r.preferred_unit = r.triad.unit();
    r.synonyms = std::move(synonyms);
    return r;
}

/// Small hand-made laboratory catalogue.
inline std::vector<labharm::ReferenceRecord> lab_records() {
    return {
        record("R01", "glucose", "serum", "mg/dl"),
        record("R02", "glucose", "urine", "mg/dl"),
        record("R03", "hemoglobin", "blood", "g/dl", {"hgb"}),
        record("R04", "platelet count", "blood", "10^3/ul"),
        record("R05", "sodium", "serum", "mmol/l"),
        record("R06", "potassium", "serum", "mmol/l"),
        record("R07", "creatinine", "serum", "mg/dl"),
        record("R08", "creatinine", "urine", "mg/dl"),
        record("R09", "white blood cell count", "blood", "10^3/ul", {"wbc"}),
        record("R10", "albumin", "plasma", "g/l"),
    };
}

/// Unique scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::mt19937_64 gen(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() / ("labharm-test-" + std::to_string(gen()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace fixtures
