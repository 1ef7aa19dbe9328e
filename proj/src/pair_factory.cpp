#include "labharm/pair_factory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "labharm/error.hpp"
#include "labharm/parallel.hpp"
#include "labharm/text.hpp"

namespace labharm {

namespace {

constexpr std::size_t kBlockSize = 4096;

std::string pool_key(const Triad& t) { return t.test() + '\x1f' + t.sample() + '\x1f' + t.unit(); }

constexpr std::array<bool, 3> corrupted_fields(CorruptionClass c) {
    switch (c) {
    case CorruptionClass::POS: return {false, false, false};
    case CorruptionClass::N1: return {true, false, false};
    case CorruptionClass::N2: return {true, true, false};
    case CorruptionClass::N3: return {true, true, true};
    }
    return {false, false, false};
}

}  // namespace

std::string_view to_string(CorruptionClass c) {
    switch (c) {
    case CorruptionClass::POS: return "POS";
    case CorruptionClass::N1: return "N1";
    case CorruptionClass::N2: return "N2";
    case CorruptionClass::N3: return "N3";
    }
    return "?";
}

CorruptionClass parse_corruption_class(std::string_view s) {
    if (s == "POS") return CorruptionClass::POS;
    if (s == "N1") return CorruptionClass::N1;
    if (s == "N2") return CorruptionClass::N2;
    if (s == "N3") return CorruptionClass::N3;
    throw ParseError("unknown corruption class '" + std::string(s) + "'");
}

std::string_view to_string(Difficulty d) { return d == Difficulty::hard ? "hard" : "easy"; }

Difficulty parse_difficulty(std::string_view s) {
    if (s == "easy") return Difficulty::easy;
    if (s == "hard") return Difficulty::hard;
    throw ParseError("unknown difficulty '" + std::string(s) + "'");
}

bool synonym_equivalent(const Triad& a, const Triad& b, const SynonymDictionary& dict) {
    return std::all_of(kFields.begin(), kFields.end(), [&](Field f) { return dict.equivalent(a.get(f), b.get(f), f); });
}

bool label_sound(const LabeledPair& p, const SynonymDictionary& dict) {
    const auto expect = corrupted_fields(p.corruption);
    if ((p.label == 1) != (p.corruption == CorruptionClass::POS)) return false;
    for (auto f : kFields) {
        const bool differs = !dict.equivalent(p.left.get(f), p.right.get(f), f);
        if (differs != expect[static_cast<std::size_t>(f)]) return false;
    }
    return true;
}

// ---------------------------------------------------------------- schedule

void GenerationSchedule::validate() const {
    if (total == 0) throw InvalidArgument("schedule total must be positive");
    if (!(positive_fraction >= 0.0 && positive_fraction <= 1.0)) {
        throw InvalidArgument("positive fraction must be in [0,1]");
    }
    double sum = 0.0;
    for (double f : negative_fractions) {
        if (!(f >= 0.0)) throw InvalidArgument("negative fractions must be >= 0");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("negative class fractions must sum to 1");
    if (ramp.empty()) throw InvalidArgument("difficulty ramp needs at least one stage");
    double prev_until = 0.0, prev_hard = 0.0;
    for (const auto& s : ramp) {
        if (!(s.until > prev_until) || !(s.hard_fraction >= prev_hard) || s.hard_fraction > 1.0) {
            throw InvalidArgument("difficulty ramp must be increasing in `until` and non-decreasing in hard fraction");
        }
        prev_until = s.until;
        prev_hard = s.hard_fraction;
    }
    if (std::abs(ramp.back().until - 1.0) > 1e-12) throw InvalidArgument("last ramp stage must end at 1.0");
}

double GenerationSchedule::hard_fraction_at(std::size_t index) const {
    const double pos = (static_cast<double>(index) + 0.5) / static_cast<double>(total);
    for (const auto& s : ramp) {
        if (pos < s.until) return s.hard_fraction;
    }
    return ramp.back().hard_fraction;
}

std::vector<CorruptionClass> GenerationSchedule::class_sequence() const {
    validate();
    const std::array<double, 4> target{positive_fraction, (1.0 - positive_fraction) * negative_fractions[0],
                                       (1.0 - positive_fraction) * negative_fractions[1],
                                       (1.0 - positive_fraction) * negative_fractions[2]};
    std::array<double, 4> count{};
    std::vector<CorruptionClass> seq(total);
    for (std::size_t i = 0; i < total; ++i) {
        std::size_t best = 0;
        double best_deficit = -1e300;
        for (std::size_t c = 0; c < 4; ++c) {
            if (target[c] <= 0.0) continue;
            const double deficit = static_cast<double>(i + 1) * target[c] - count[c];
            if (deficit > best_deficit + 1e-12) {
                best_deficit = deficit;
                best = c;
            }
        }
        count[best] += 1.0;
        seq[i] = static_cast<CorruptionClass>(best);
    }
    return seq;
}

// ---------------------------------------------------------------- mining

std::vector<Triad> mine_hard_negatives(const Triad& source, const HybridRetriever& retriever,
                                       const SynonymDictionary& dict, std::size_t k, const RetrievalConfig& cfg) {
    if (k == 0) return {};
    RetrievalConfig c = cfg;
    c.top_k = std::max<std::size_t>(cfg.top_k, 4 * k + 8);
    const auto candidates = retriever.retrieve(source, c);

    std::unordered_set<std::string> source_tokens;
    for (auto f : kFields) {
        for (auto& t : tokenize(source.get(f))) source_tokens.insert(std::move(t));
    }
    std::vector<Triad> out;
    std::set<Triad> seen;
    for (const auto& cand : candidates) {
        const auto& triad = retriever.lexical().record(cand.doc).triad;
        if (synonym_equivalent(source, triad, dict) || !seen.insert(triad).second) continue;
        bool shares = false;
        for (auto f : kFields) {
            for (const auto& t : tokenize(triad.get(f))) shares = shares || source_tokens.contains(t);
        }
        if (!shares) continue;
        out.push_back(triad);
        if (out.size() == k) break;
    }
    return out;
}

// ---------------------------------------------------------------- factory

PairFactory::PairFactory(std::vector<Triad> pool, SynonymDictionary dict, const HybridRetriever* retriever,
                         std::size_t hard_k)
    : pool_(std::move(pool)), dict_(std::move(dict)), retriever_(retriever), hard_k_(hard_k) {
    if (pool_.empty()) throw InsufficientPool("pair factory needs a non-empty pool");
    std::array<std::set<std::string>, 3> distinct;
    for (std::size_t i = 0; i < pool_.size(); ++i) {
        for (auto f : kFields) distinct[static_cast<std::size_t>(f)].insert(pool_[i].get(f));
        pool_index_.emplace(pool_key(pool_[i]), i);
    }
    for (std::size_t f = 0; f < 3; ++f) values_[f].assign(distinct[f].begin(), distinct[f].end());
}

const std::vector<Triad>& PairFactory::mined(std::size_t source_index) const {
    {
        std::lock_guard lock(mined_mutex_);
        if (auto it = mined_.find(source_index); it != mined_.end()) return *it->second;
    }
    auto list = std::make_unique<std::vector<Triad>>();
    if (retriever_) *list = mine_hard_negatives(pool_[source_index], *retriever_, dict_, hard_k_);
    std::lock_guard lock(mined_mutex_);
    auto [it, inserted] = mined_.emplace(source_index, std::move(list));
    return *it->second;
}

std::string PairFactory::pick_outside(Field f, const std::string& value, Rng& rng) const {
    const auto& values = values_[static_cast<std::size_t>(f)];
    for (int attempt = 0; attempt < 64; ++attempt) {
        const auto& v = values[rng.below(values.size())];
        if (!dict_.equivalent(v, value, f) && !(f == Field::test && v.empty())) return v;
    }
    std::vector<const std::string*> options;
    for (const auto& v : values) {
        if (!dict_.equivalent(v, value, f) && !(f == Field::test && v.empty())) options.push_back(&v);
    }
    const std::size_t needed = f == Field::test ? 2 : 1;
    if (options.size() < needed) {
        throw InsufficientPool("pool has too few " + std::string(to_string(f)) + " values outside the group of '" +
                               value + "'");
    }
    return *options[rng.below(options.size())];
}

std::string PairFactory::maybe_synonym(Field f, const std::string& value, Rng& rng, double p) const {
    const auto gid = dict_.find(value, f);
    if (!gid || !rng.bernoulli(p)) return value;
    const auto& group = dict_.groups(f)[*gid];
    if (group.size() < 2) return value;
    const auto& pick = group[rng.below(group.size())];
    return pick;
}

LabeledPair PairFactory::make_positive(const Triad& source, Rng& rng) const {
    std::vector<Field> substitutable;
    for (auto f : kFields) {
        const auto gid = dict_.find(source.get(f), f);
        if (gid && dict_.groups(f)[*gid].size() >= 2) substitutable.push_back(f);
    }
    Triad right = source;
    if (!substitutable.empty()) {
        std::vector<Field> chosen;
        for (auto f : substitutable) {
            if (rng.bernoulli(0.5)) chosen.push_back(f);
        }
        if (chosen.empty()) chosen.push_back(substitutable[rng.below(substitutable.size())]);
        for (auto f : chosen) {
            const auto& group = dict_.groups(f)[*dict_.find(source.get(f), f)];
            std::vector<const std::string*> others;
            for (const auto& m : group) {
                if (m != source.get(f)) others.push_back(&m);
            }
            right = right.with(f, *others[rng.below(others.size())]);
        }
    }
    return {source, std::move(right), 1, CorruptionClass::POS, Difficulty::easy};
}

LabeledPair PairFactory::make_negative(const Triad& source, CorruptionClass cls, Difficulty difficulty,
                                       Rng& rng) const {
    if (cls == CorruptionClass::POS) throw InvalidArgument("make_negative needs N1, N2 or N3");
    const auto corrupt = corrupted_fields(cls);
    std::array<std::optional<std::string>, 3> replacement;
    bool used_mined = false;

    if (difficulty == Difficulty::hard && retriever_) {
        std::vector<Triad> local;
        const std::vector<Triad>* near = nullptr;
        if (auto it = pool_index_.find(pool_key(source)); it != pool_index_.end()) {
            near = &mined(it->second);
        } else {
            local = mine_hard_negatives(source, *retriever_, dict_, hard_k_);
            near = &local;
        }
        if (!near->empty()) {
            const auto offset = rng.below(near->size());
            // Prefer one near-miss triad that differs on every corrupted field.
            for (std::size_t k = 0; k < near->size() && !used_mined; ++k) {
                const auto& cand = (*near)[(offset + k) % near->size()];
                bool ok = true;
                for (auto f : kFields) {
                    const auto fi = static_cast<std::size_t>(f);
                    if (corrupt[fi] && dict_.equivalent(cand.get(f), source.get(f), f)) ok = false;
                }
                if (!ok) continue;
                for (auto f : kFields) {
                    const auto fi = static_cast<std::size_t>(f);
                    if (corrupt[fi]) replacement[fi] = cand.get(f);
                }
                used_mined = true;
            }
            // Otherwise take whichever corrupted fields some near miss offers.
            if (!used_mined) {
                for (auto f : kFields) {
                    const auto fi = static_cast<std::size_t>(f);
                    if (!corrupt[fi]) continue;
                    for (std::size_t k = 0; k < near->size(); ++k) {
                        const auto& cand = (*near)[(offset + k) % near->size()];
                        if (!dict_.equivalent(cand.get(f), source.get(f), f)) {
                            replacement[fi] = cand.get(f);
                            used_mined = true;
                            break;
                        }
                    }
                }
            }
        }
    }

    std::array<std::string, 3> parts;
    for (auto f : kFields) {
        const auto fi = static_cast<std::size_t>(f);
        if (corrupt[fi]) {
            parts[fi] = replacement[fi] ? *replacement[fi] : pick_outside(f, source.get(f), rng);
        } else {
            parts[fi] = maybe_synonym(f, source.get(f), rng, 0.3);
        }
    }
    Triad right(parts[0], parts[1], parts[2]);
    return {source, std::move(right), 0, cls, used_mined ? Difficulty::hard : Difficulty::easy};
}

void PairFactory::generate(const GenerationSchedule& schedule, std::uint64_t seed,
                           const std::function<void(const LabeledPair&)>& sink, std::size_t threads) const {
    const auto classes = schedule.class_sequence();
    std::vector<Difficulty> difficulty(classes.size(), Difficulty::easy);
    {
        std::size_t stage_negatives = 0, stage_hard = 0;
        double stage_fraction = -1.0;
        for (std::size_t i = 0; i < classes.size(); ++i) {
            if (classes[i] == CorruptionClass::POS) continue;
            const double h = schedule.hard_fraction_at(i);
            if (h != stage_fraction) {
                stage_fraction = h;
                stage_negatives = stage_hard = 0;
            }
            ++stage_negatives;
            if (static_cast<double>(stage_negatives) * h - static_cast<double>(stage_hard) > 0.5) {
                difficulty[i] = Difficulty::hard;
                ++stage_hard;
            }
        }
    }

    const auto blocks = (classes.size() + kBlockSize - 1) / kBlockSize;
    const std::size_t batch = std::max<std::size_t>(threads, 1) * 4;
    for (std::size_t first = 0; first < blocks; first += batch) {
        const auto count = std::min(batch, blocks - first);
        std::vector<std::vector<LabeledPair>> out(count);
        parallel_for(count, threads, [&](std::size_t j) {
            const auto b = first + j;
            Rng rng(Rng::derive(seed, b));
            const auto begin = b * kBlockSize;
            const auto end = std::min(begin + kBlockSize, classes.size());
            out[j].reserve(end - begin);
            for (auto i = begin; i < end; ++i) {
                const auto& source = pool_[rng.below(pool_.size())];
                if (classes[i] == CorruptionClass::POS) {
                    out[j].push_back(make_positive(source, rng));
                } else {
                    out[j].push_back(make_negative(source, classes[i], difficulty[i], rng));
                }
            }
        });
        for (const auto& block : out) {
            for (const auto& p : block) sink(p);
        }
    }
}

std::vector<LabeledPair> PairFactory::generate(const GenerationSchedule& schedule, std::uint64_t seed,
                                               std::size_t threads) const {
    std::vector<LabeledPair> out;
    out.reserve(schedule.total);
    generate(schedule, seed, [&](const LabeledPair& p) { out.push_back(p); }, threads);
    return out;
}

// ---------------------------------------------------------------- JSONL

namespace {

nlohmann::json triad_json(const Triad& t) {
    return {{"test", t.test()}, {"sample", t.sample()}, {"unit", t.unit()}};
}

Triad triad_from_json(const nlohmann::json& j) {
    return Triad(j.at("test").get<std::string>(), j.value("sample", std::string{}), j.value("unit", std::string{}));
}

}  // namespace

void write_pair_jsonl(std::ostream& out, const LabeledPair& p) {
    nlohmann::json j{{"left", triad_json(p.left)},
                     {"right", triad_json(p.right)},
                     {"label", p.label},
                     {"class", to_string(p.corruption)},
                     {"difficulty", to_string(p.difficulty)}};
    out << j.dump() << '\n';
}

std::vector<LabeledPair> read_pairs_jsonl(std::istream& in) {
    std::vector<LabeledPair> pairs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            LabeledPair p;
            p.left = triad_from_json(j.at("left"));
            p.right = triad_from_json(j.at("right"));
            p.label = j.at("label").get<int>();
            if (p.label != 0 && p.label != 1) throw ParseError("label must be 0 or 1");
            p.corruption = parse_corruption_class(j.at("class").get<std::string>());
            p.difficulty = parse_difficulty(j.value("difficulty", std::string("easy")));
            if ((p.label == 1) != (p.corruption == CorruptionClass::POS)) {
                throw ParseError("label " + std::to_string(p.label) + " contradicts class " +
                                 std::string(to_string(p.corruption)));
            }
            pairs.push_back(std::move(p));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("pair file line " + std::to_string(lineno) + ": " + e.what());
        } catch (const Error& e) {
            throw ParseError("pair file line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return pairs;
}

}  // namespace labharm
