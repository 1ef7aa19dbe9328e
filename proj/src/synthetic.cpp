#include "labharm/synthetic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "labharm/error.hpp"
#include "labharm/text.hpp"

namespace labharm {

namespace {

enum SampleSet { CHEM, SER, HEME, GAS, URN, CSFX, HORM, COAG, STOOL, URINE_ONLY, SER_URN, BLOOD_ONLY };

const std::vector<std::vector<std::string>>& sample_sets() {
    static const std::vector<std::vector<std::string>> s{
        /*CHEM*/ {"serum", "plasma", "serum/plasma", "urine", "24 hour urine", "blood", "capillary blood", "venous blood", "cerebrospinal fluid"},
        /*SER*/ {"serum", "plasma", "serum/plasma", "blood", "venous blood", "capillary blood"},
        /*HEME*/ {"blood", "capillary blood", "venous blood", "arterial blood", "cord blood"},
        /*GAS*/ {"arterial blood", "venous blood", "capillary blood", "blood", "cord blood", "mixed venous blood"},
        /*URN*/ {"urine", "24 hour urine"},
        /*CSFX*/ {"serum", "plasma", "serum/plasma", "cerebrospinal fluid", "blood"},
        /*HORM*/ {"serum", "plasma", "serum/plasma", "saliva", "urine", "24 hour urine", "blood"},
        /*COAG*/ {"plasma", "blood", "venous blood", "capillary blood"},
        /*STOOL*/ {"stool"},
        /*URINE_ONLY*/ {"urine"},
        /*SER_URN*/ {"serum", "plasma", "serum/plasma", "urine", "24 hour urine"},
        /*BLOOD_ONLY*/ {"blood", "venous blood"},
    };
    return s;
}

struct Analyte {
    const char* name;
    std::vector<std::string> synonyms;
    SampleSet samples;
    std::vector<std::string> units;
    std::vector<std::string> modifiers;
};

// clang-format off
const std::vector<Analyte>& catalogue() {
    static const std::vector<Analyte> c{
        {"glucose", {"glu", "blood sugar"}, CSFX, {"mg/dl", "mmol/l"}, {"fasting", "2 hour post meal", "random"}},
        {"sodium", {"na"}, CHEM, {"mmol/l", "mmol/24h"}, {"point of care"}},
        {"potassium", {"k"}, CHEM, {"mmol/l", "mmol/24h"}, {"point of care"}},
        {"chloride", {"cl"}, CHEM, {"mmol/l", "mmol/24h"}, {"point of care"}},
        {"bicarbonate", {"hco3", "co2 content"}, SER, {"mmol/l"}, {"standard"}},
        {"calcium", {"ca"}, CHEM, {"mg/dl", "mmol/l"}, {"ionized"}},
        {"magnesium", {"mg"}, CHEM, {"mg/dl", "mmol/l"}, {"ionized"}},
        {"phosphorus", {"phos", "inorganic phosphate"}, CHEM, {"mg/dl", "mmol/l"}, {"fractional excretion"}},
        {"blood urea nitrogen", {"bun", "urea nitrogen"}, CHEM, {"mg/dl", "mmol/l"}, {"point of care"}},
        {"creatinine", {"creat", "cre"}, CHEM, {"mg/dl", "umol/l", "mg/24h"}, {"point of care"}},
        {"uric acid", {"urate"}, CHEM, {"mg/dl", "umol/l"}, {"fractional excretion"}},
        {"albumin", {"alb"}, CSFX, {"g/dl", "g/l", "mg/l"}, {}},
        {"protein", {"prot"}, CSFX, {"g/dl", "g/l", "mg/dl"}, {"total"}},
        {"bilirubin", {"bili"}, SER, {"mg/dl", "umol/l"}, {"total", "direct", "indirect"}},
        {"alkaline phosphatase", {"alp", "alk phos"}, SER, {"u/l"}, {"bone specific"}},
        {"alanine aminotransferase", {"alt", "sgpt"}, SER, {"u/l"}, {}},
        {"aspartate aminotransferase", {"ast", "sgot"}, SER, {"u/l"}, {}},
        {"gamma glutamyl transferase", {"ggt", "gamma gt"}, SER, {"u/l"}, {}},
        {"lactate dehydrogenase", {"ldh", "ld"}, CSFX, {"u/l"}, {}},
        {"creatine kinase", {"ck", "cpk"}, SER, {"u/l", "ug/l"}, {"mb"}},
        {"amylase", {"amy"}, SER_URN, {"u/l"}, {"pancreatic"}},
        {"lipase", {"lps"}, SER, {"u/l"}, {"pancreatic"}},
        {"cholesterol", {"chol"}, SER, {"mg/dl", "mmol/l"}, {"total", "hdl", "ldl", "non hdl"}},
        {"triglycerides", {"trig", "tg"}, SER, {"mg/dl", "mmol/l"}, {"fasting"}},
        {"iron", {"fe"}, SER, {"ug/dl", "umol/l"}, {"binding capacity"}},
        {"ferritin", {"ferr"}, SER, {"ug/l", "pmol/l"}, {"point of care"}},
        {"transferrin", {"trf"}, SER, {"mg/dl", "g/l"}, {"saturation"}},
        {"vitamin b12", {"cobalamin", "b12"}, SER, {"ng/l", "pmol/l"}, {"active"}},
        {"folate", {"folic acid"}, CSFX, {"ug/l", "nmol/l"}, {}},
        {"25 hydroxyvitamin d", {"vitamin d", "25-oh vitamin d"}, SER, {"ug/l", "nmol/l"}, {}},
        {"thyroid stimulating hormone", {"tsh", "thyrotropin"}, SER, {"uiu/ml", "u/ml"}, {}},
        {"thyroxine", {"t4"}, SER, {"ug/dl", "nmol/l", "ng/dl", "pmol/l"}, {"free"}},
        {"triiodothyronine", {"t3"}, SER, {"ng/dl", "nmol/l", "pg/dl", "pmol/l"}, {"free", "reverse"}},
        {"cortisol", {"cort"}, HORM, {"ug/dl", "nmol/l", "ug/24h"}, {"free"}},
        {"insulin", {"ins"}, SER, {"uiu/ml", "pmol/l"}, {"free"}},
        {"c peptide", {"c-peptide"}, SER, {"ug/l", "nmol/l"}, {}},
        {"prolactin", {"prl"}, SER, {"ug/l", "miu/ml"}, {}},
        {"testosterone", {"testo"}, HORM, {"ng/dl", "nmol/l"}, {"free", "bioavailable"}},
        {"estradiol", {"e2"}, HORM, {"ng/l", "pmol/l"}, {"free"}},
        {"progesterone", {"prog"}, HORM, {"ug/l", "nmol/l"}, {"17 hydroxy"}},
        {"luteinizing hormone", {"lh", "lutropin"}, SER_URN, {"miu/ml", "u/l"}, {}},
        {"follicle stimulating hormone", {"fsh", "follitropin"}, SER_URN, {"miu/ml", "u/l"}, {}},
        {"chorionic gonadotropin", {"hcg", "choriogonadotropin"}, SER_URN, {"miu/ml", "u/l"}, {"beta subunit"}},
        {"prostate specific antigen", {"psa"}, SER, {"ug/l"}, {"free", "complexed"}},
        {"hemoglobin", {"hgb", "hb"}, HEME, {"g/dl", "g/l", "mmol/l"}, {"plasma free"}},
        {"hemoglobin a1c", {"hba1c", "a1c"}, HEME, {"%", "mmol/mol"}, {}},
        {"hematocrit", {"hct", "packed cell volume"}, HEME, {"%", "ratio"}, {"calculated"}},
        {"white blood cell count", {"wbc", "leukocyte count"}, HEME, {"10^3/ul", "/ul"}, {"corrected"}},
        {"red blood cell count", {"rbc count", "erythrocyte count"}, HEME, {"10^6/ul", "10^6/l"}, {}},
        {"platelet count", {"plt", "platelets"}, HEME, {"10^3/ul", "10^3/l"}, {"immature fraction"}},
        {"mean corpuscular volume", {"mcv"}, HEME, {"fl"}, {}},
        {"mean corpuscular hemoglobin", {"mch"}, HEME, {"pg"}, {"concentration"}},
        {"red cell distribution width", {"rdw"}, HEME, {"%", "fl"}, {}},
        {"neutrophils", {"neut", "neutrophil count"}, HEME, {"10^3/ul", "%"}, {"band form"}},
        {"lymphocytes", {"lymph", "lymphocyte count"}, HEME, {"10^3/ul", "%"}, {"atypical"}},
        {"monocytes", {"mono", "monocyte count"}, HEME, {"10^3/ul", "%"}, {"activated"}},
        {"eosinophils", {"eos", "eosinophil count"}, HEME, {"10^3/ul", "%"}, {"absolute"}},
        {"basophils", {"baso", "basophil count"}, HEME, {"10^3/ul", "%"}, {"absolute"}},
        {"reticulocytes", {"retic", "reticulocyte count"}, HEME, {"%", "10^3/ul", "10^6/ul"}, {}},
        {"erythrocyte sedimentation rate", {"esr", "sed rate"}, HEME, {"mm/h"}, {}},
        {"prothrombin time", {"pt", "protime"}, COAG, {"sec"}, {"point of care"}},
        {"international normalized ratio", {"inr"}, COAG, {"ratio"}, {}},
        {"activated partial thromboplastin time", {"aptt", "ptt"}, COAG, {"sec"}, {}},
        {"fibrinogen", {"fib"}, COAG, {"mg/dl", "g/l"}, {"functional"}},
        {"d dimer", {"d-dimer", "fibrin degradation fragment"}, COAG, {"mg/l", "ug/l"}, {}},
        {"ph", {"acidity"}, GAS, {"", "[ph]"}, {"temperature corrected"}},
        {"partial pressure of oxygen", {"po2", "oxygen tension"}, GAS, {"mmhg", "kpa"}, {}},
        {"partial pressure of carbon dioxide", {"pco2", "carbon dioxide tension"}, GAS, {"mmhg", "kpa"}, {}},
        {"oxygen saturation", {"so2", "o2 sat"}, GAS, {"%"}, {"calculated"}},
        {"lactate", {"lactic acid"}, GAS, {"mmol/l", "mg/dl"}, {"point of care"}},
        {"ammonia", {"nh3"}, COAG, {"umol/l", "ug/dl"}, {"point of care"}},
        {"osmolality", {"osmo"}, SER_URN, {"mosm/kg"}, {"calculated"}},
        {"c reactive protein", {"crp"}, SER, {"mg/l", "mg/dl"}, {"high sensitivity"}},
        {"procalcitonin", {"pct"}, SER, {"ug/l"}, {}},
        {"troponin i", {"tni", "ctni"}, SER, {"ng/l", "ug/l"}, {"high sensitivity"}},
        {"troponin t", {"tnt", "ctnt"}, SER, {"ng/l", "ug/l"}, {"high sensitivity"}},
        {"natriuretic peptide b", {"bnp", "b type natriuretic peptide"}, COAG, {"ng/l"}, {}},
        {"n terminal pro bnp", {"nt probnp", "nt-probnp"}, SER, {"ng/l", "pmol/l"}, {}},
        {"estimated glomerular filtration rate", {"egfr", "gfr estimated"}, SER, {"ml/min/1.73m2"}, {"cystatin based"}},
        {"creatinine clearance", {"crcl"}, URN, {"ml/min", "ml/min/1.73m2"}, {}},
        {"microalbumin", {"malb", "urine albumin"}, URN, {"mg/l", "mg/24h", "ug/min"}, {}},
        {"albumin creatinine ratio", {"acr", "uacr"}, URINE_ONLY, {"mg/g", "mg/mmol"}, {}},
        {"specific gravity", {"sg", "sp gr"}, URINE_ONLY, {"", "ratio"}, {}},
        {"ketones", {"ket", "ketone bodies"}, CHEM, {"mg/dl", "mmol/l", ""}, {"beta hydroxybutyrate"}},
        {"leukocyte esterase", {"leu esterase"}, URINE_ONLY, {"", "/ul"}, {}},
        {"nitrite", {"nit"}, URINE_ONLY, {""}, {}},
        {"casts", {"urine casts"}, URINE_ONLY, {"/lpf"}, {"hyaline", "granular"}},
        {"occult blood", {"fecal occult blood", "fobt"}, STOOL, {"", "ug/l"}, {"immunochemical"}},
        {"calprotectin", {"fecal calprotectin"}, STOOL, {"ug/g", "mg/kg"}, {}},
        {"hiv 1 rna", {"hiv viral load"}, SER, {"copies/ml", "log copies/ml"}, {}},
        {"hepatitis b surface antigen", {"hbsag"}, SER, {"", "u/ml"}, {"quantitative"}},
        {"hepatitis c antibody", {"hcv ab", "anti hcv"}, SER, {"", "ratio"}, {}},
        {"rubella igg", {"rubella antibody"}, SER, {"u/ml", "titer"}, {}},
        {"antinuclear antibody", {"ana"}, SER, {"titer", ""}, {"pattern"}},
        {"rheumatoid factor", {"rf"}, SER, {"u/ml", "ku/l"}, {}},
        {"immunoglobulin g", {"igg"}, CSFX, {"mg/dl", "g/l"}, {"subclass 4"}},
        {"immunoglobulin a", {"iga"}, SER, {"mg/dl", "g/l"}, {}},
        {"immunoglobulin m", {"igm"}, SER, {"mg/dl", "g/l"}, {}},
        {"immunoglobulin e", {"ige"}, SER, {"ku/l", "u/ml"}, {}},
        {"complement c3", {"c3"}, SER, {"mg/dl", "g/l"}, {}},
        {"complement c4", {"c4"}, SER, {"mg/dl", "g/l"}, {}},
        {"haptoglobin", {"hapto"}, SER, {"mg/dl", "g/l"}, {}},
        {"lead", {"pb"}, BLOOD_ONLY, {"ug/dl", "umol/l"}, {}},
        {"digoxin", {"dig"}, SER, {"ug/l", "nmol/l"}, {}},
        {"vancomycin", {"vanc"}, SER, {"mg/l", "umol/l"}, {"trough", "peak"}},
        {"lithium", {"li"}, SER, {"mmol/l"}, {"red cell"}},
        {"valproic acid", {"valproate"}, SER, {"mg/l", "umol/l"}, {"free"}},
        {"ethanol", {"alcohol", "etoh"}, CHEM, {"mg/dl", "mmol/l"}, {}},
        {"acetaminophen", {"paracetamol", "apap"}, SER, {"mg/l", "umol/l"}, {}},
        {"salicylate", {"aspirin level"}, SER, {"mg/dl", "mmol/l"}, {}},
        {"homocysteine", {"hcy"}, SER, {"umol/l"}, {"fasting"}},
        {"zinc", {"zn"}, SER_URN, {"ug/dl", "umol/l"}, {}},
        {"copper", {"cu"}, SER_URN, {"ug/dl", "umol/l"}, {}},
        {"ceruloplasmin", {"cp"}, SER, {"mg/dl", "g/l"}, {}},
        {"alpha fetoprotein", {"afp"}, SER, {"ug/l", "u/ml"}, {"l3 fraction"}},
        {"carcinoembryonic antigen", {"cea"}, SER, {"ug/l"}, {}},
        {"cancer antigen 125", {"ca 125", "ca125"}, SER, {"u/ml"}, {}},
        {"cancer antigen 19-9", {"ca 19-9", "ca19-9"}, SER, {"u/ml"}, {}},
        {"parathyroid hormone", {"pth", "parathormone"}, SER, {"ng/l", "pmol/l"}, {"intact"}},
    };
    return c;
}
// clang-format on

struct Entry {
    std::string test;
    std::vector<std::string> synonyms;
    std::string sample;
    std::string unit;
    std::string preferred_unit;
    double factor;
};

std::vector<Entry> enumerate_entries() {
    std::vector<Entry> out;
    for (const auto& a : catalogue()) {
        std::vector<std::pair<std::string, std::vector<std::string>>> names{{a.name, a.synonyms}};
        for (const auto& m : a.modifiers) {
            std::vector<std::string> syn;
            for (const auto& s : a.synonyms) syn.push_back(s + " " + m);
            syn.push_back(m + " " + a.name);
            names.emplace_back(std::string(a.name) + " " + m, std::move(syn));
        }
        for (const auto& [name, syn] : names) {
            for (const auto& sample : sample_sets()[a.samples]) {
                for (std::size_t u = 0; u < a.units.size(); ++u) {
                    // Deterministic conversion factor to the analyte's first unit.
                    const double factor = u == 0 ? 1.0 : std::round(std::pow(10.0, static_cast<double>((name.size() + u * 7) % 5) - 2.0) * 1000.0 * (1.0 + 0.137 * static_cast<double>(u))) / 1000.0;
                    out.push_back({name, syn, sample, a.units[u], a.units[0], factor});
                }
            }
        }
    }
    return out;
}

const std::vector<std::string> kQualifiers{"level", "lvl", "conc", "quant", "result", "measurement", "test"};

std::string pick(const std::vector<std::string>& v, Rng& rng) { return v[rng.below(v.size())]; }

std::string variant(const SynonymDictionary& dict, Field f, const std::string& value, Rng& rng) {
    auto group = dict.group_of(value, f);
    std::vector<std::string> others;
    for (auto& g : group) {
        if (g != value) others.push_back(g);
    }
    return others.empty() ? value : pick(others, rng);
}

std::string noisy(const std::string& text, Rng& rng, double rate) {
    if (text.empty() || !rng.bernoulli(rate)) return text;
    std::string out;
    if (rng.bernoulli(0.5)) out += "  ";
    for (char c : text) {
        if (c >= 'a' && c <= 'z' && rng.bernoulli(0.3)) c = static_cast<char>(c - 'a' + 'A');
        out += c;
        if (c == ' ' && rng.bernoulli(0.5)) out += ' ';
    }
    if (rng.bernoulli(0.5)) out += ' ';
    return out;
}

std::string format_number(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

}  // namespace

std::string inject_typo(const std::string& text, Rng& rng) {
    auto tokens = split(text, ' ');
    std::size_t best = tokens.size();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto& t = tokens[i];
        if (t.size() < 4 || !std::all_of(t.begin(), t.end(), [](char c) { return c >= 'a' && c <= 'z'; })) continue;
        if (best == tokens.size() || t.size() > tokens[best].size()) best = i;
    }
    if (best == tokens.size()) return text;
    auto& t = tokens[best];
    const auto pos = 1 + rng.below(t.size() - 2);  // keep the first and last letter
    switch (rng.below(4)) {
    case 0: t.erase(pos, 1); break;
    case 1: std::swap(t[pos], t[pos + 1 < t.size() ? pos + 1 : pos - 1]); break;
    case 2: t[pos] = static_cast<char>('a' + (t[pos] - 'a' + 1 + rng.below(25)) % 26); break;
    default: t.insert(pos, 1, static_cast<char>('a' + rng.below(26))); break;
    }
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) out += (i ? " " : "") + tokens[i];
    return out;
}

Benchmark make_benchmark(const SynonymDictionary& seed_dictionary, const SyntheticConfig& cfg) {
    auto entries = enumerate_entries();
    if (cfg.records > entries.size()) {
        throw InvalidArgument("catalogue supports at most " + std::to_string(entries.size()) + " records");
    }
    if (cfg.queries + cfg.validation_queries > cfg.records) {
        throw InvalidArgument("more queries than records requested");
    }
    Rng rng(cfg.seed);
    for (std::size_t i = entries.size(); i > 1; --i) std::swap(entries[i - 1], entries[rng.below(i)]);
    entries.resize(cfg.records);

    Benchmark b;
    std::set<std::string> codes;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        auto& e = entries[i];
        ReferenceRecord r;
        char id[16];
        std::snprintf(id, sizeof id, "LR%05zu", i + 1);
        r.id = id;
        r.triad = Triad(e.test, e.sample, e.unit);
        std::string code;
        do {
            code = std::to_string(1000 + rng.below(99000)) + "-" + std::to_string(rng.below(10));
        } while (!codes.insert(code).second);
        r.labcode = code;
        r.preferred_unit = normalize_text(e.preferred_unit);
        r.conversion_factor = e.factor;
        for (const auto& s : e.synonyms) r.synonyms.push_back(normalize_text(s));
        b.records.push_back(std::move(r));
    }
    b.dictionary = seed_dictionary.with_record_synonyms(b.records);

    std::vector<std::size_t> order(b.records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    auto make_query = [&](std::size_t n, const ReferenceRecord& gold, const std::string& prefix) {
        std::string test = gold.triad.test();
        std::string sample = gold.triad.sample();
        std::string unit = gold.triad.unit();
        if (rng.bernoulli(cfg.test_synonym_rate)) test = variant(b.dictionary, Field::test, test, rng);
        if (rng.bernoulli(cfg.typo_rate)) {
            test = inject_typo(test, rng);
            if (rng.bernoulli(cfg.double_typo_rate)) test = inject_typo(test, rng);
        }
        if (rng.bernoulli(cfg.context_rate) && !sample.empty()) test = split(sample, ' ').back() + " " + test;
        if (rng.bernoulli(cfg.qualifier_rate)) test += " " + pick(kQualifiers, rng);
        if (rng.bernoulli(cfg.sample_synonym_rate)) sample = variant(b.dictionary, Field::sample, sample, rng);
        if (rng.bernoulli(cfg.component_typo_rate)) sample = inject_typo(sample, rng);
        if (rng.bernoulli(cfg.unit_synonym_rate)) unit = variant(b.dictionary, Field::unit, unit, rng);
        if (rng.bernoulli(cfg.component_typo_rate)) unit = inject_typo(unit, rng);
        RawQueryRow row;
        row.id = prefix + std::to_string(n + 1);
        row.test = noisy(test, rng, cfg.noise_rate);
        row.sample = noisy(sample, rng, cfg.noise_rate);
        row.unit = noisy(unit, rng, cfg.noise_rate);
        if (rng.bernoulli(0.3)) row.code_hint = gold.labcode;
        row.frequency = std::to_string(1 + rng.below(5000));
        if (rng.bernoulli(0.7)) {
            const double mean = std::round(rng.uniform(1.0, 200.0) * 100.0) / 100.0;
            const double sd = std::round(mean * rng.uniform(0.05, 0.3) * 100.0) / 100.0;
            row.min = format_number(std::round((mean - 2.5 * sd) * 100.0) / 100.0 < 0 ? 0.0 : std::round((mean - 2.5 * sd) * 100.0) / 100.0);
            row.max = format_number(std::round((mean + 2.5 * sd) * 100.0) / 100.0);
            row.mean = format_number(mean);
            row.std = format_number(sd);
        }
        return row;
    };
    for (std::size_t i = 0; i < cfg.queries; ++i) {
        const auto& gold = b.records[order[i]];
        auto row = make_query(i, gold, "q");
        b.gold.emplace(row.id, gold.id);
        b.queries.push_back(std::move(row));
    }
    for (std::size_t i = 0; i < cfg.validation_queries; ++i) {
        const auto& gold = b.records[order[cfg.queries + i]];
        auto row = make_query(i, gold, "v");
        b.validation_gold.emplace(row.id, gold.id);
        b.validation_queries.push_back(std::move(row));
    }
    return b;
}

namespace {

void write_gold(const GoldSet& gold, const std::vector<RawQueryRow>& order, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw FileError("cannot write " + path.string());
    out << "query_id,record_id\n";
    for (const auto& q : order) out << q.id << ',' << gold.at(q.id) << '\n';
}

template <typename Fn>
void write_file(const std::filesystem::path& path, Fn&& fn) {
    std::ofstream out(path);
    if (!out) throw FileError("cannot write " + path.string());
    fn(out);
}

std::vector<RawQueryRow> load_rows(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open " + path.string());
    return read_query_rows(in);
}

}  // namespace

void write_benchmark(const Benchmark& b, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_file(dir / "reference.csv", [&](std::ostream& o) { write_reference_csv(o, b.records); });
    write_file(dir / "synonyms.txt", [&](std::ostream& o) { b.dictionary.write(o); });
    write_file(dir / "queries.csv", [&](std::ostream& o) { write_query_rows(o, b.queries); });
    write_file(dir / "validation_queries.csv", [&](std::ostream& o) { write_query_rows(o, b.validation_queries); });
    write_gold(b.gold, b.queries, dir / "gold.csv");
    write_gold(b.validation_gold, b.validation_queries, dir / "validation_gold.csv");
}

Benchmark load_benchmark(const std::filesystem::path& dir) {
    Benchmark b;
    b.records = load_reference_csv(dir / "reference.csv");
    b.dictionary = SynonymDictionary::load(dir / "synonyms.txt");
    b.queries = load_rows(dir / "queries.csv");
    b.validation_queries = load_rows(dir / "validation_queries.csv");
    b.gold = load_gold(dir / "gold.csv");
    b.validation_gold = load_gold(dir / "validation_gold.csv");
    return b;
}

std::vector<QueryRecord> benchmark_queries(const std::vector<RawQueryRow>& rows) {
    std::vector<QueryRecord> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        QueryRecord q;
        q.id = r.id;
        q.triad = Triad(r.test, r.sample, r.unit);
        if (!r.code_hint.empty()) q.code_hint = r.code_hint;
        q.frequency = r.frequency.empty() ? 0 : std::stoull(r.frequency);
        out.push_back(std::move(q));
    }
    return out;
}

}  // namespace labharm
