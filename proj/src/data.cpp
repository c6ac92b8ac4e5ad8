#include "dekt/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace dekt {

namespace {

constexpr double kMaxAnswerTimeS = 3600.0;
constexpr double kMaxIntervalMin = 43200.0;

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void malformed(int line_no, const std::string& why) {
    throw std::runtime_error("malformed-row at line " + std::to_string(line_no) + ": " + why);
}

double parse_double(const std::string& s, int line_no, const std::string& field) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) malformed(line_no, "trailing characters in " + field);
        return v;
    } catch (const std::invalid_argument&) {
        malformed(line_no, "non-numeric " + field + " '" + s + "'");
    } catch (const std::out_of_range&) {
        malformed(line_no, "out-of-range " + field + " '" + s + "'");
    }
}

} // namespace

std::vector<InteractionRecord> parse_interactions(std::istream& in, const ColumnMapping* mapping) {
    std::string header_line;
    if (!std::getline(in, header_line)) throw std::runtime_error("empty input: no header row");
    auto headers = split(trim(header_line), ',');
    std::map<std::string, int> col;
    for (std::size_t i = 0; i < headers.size(); ++i) col[trim(headers[i])] = static_cast<int>(i);

    auto resolve = [&](const std::string& name, bool required) -> int {
        std::string src = name;
        if (mapping) {
            auto it = mapping->columns.find(name);
            if (it != mapping->columns.end()) src = it->second;
        }
        auto it = col.find(src);
        if (it == col.end()) {
            if (required) throw std::runtime_error("missing column '" + src + "'");
            return -1;
        }
        return it->second;
    };

    int c_student = resolve("student_id", true);
    int c_exercise = resolve("exercise_id", true);
    int c_concepts = resolve("concept_ids", true);
    int c_ts = resolve("timestamp", true);
    int c_at = resolve("answer_time_s", true);
    int c_correct = resolve("correct", true);
    int c_emo[4] = {resolve("concentration", false), resolve("boredom", false),
                    resolve("confusion", false), resolve("frustration", false)};
    char concept_sep = mapping ? mapping->concept_separator : ';';

    std::vector<InteractionRecord> records;
    std::string line;
    int line_no = 1;
    int with_emotions = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto f = split(line, ',');
        auto field = [&](int idx) -> std::string {
            if (idx < 0 || idx >= static_cast<int>(f.size())) malformed(line_no, "too few columns");
            return trim(f[static_cast<std::size_t>(idx)]);
        };

        InteractionRecord r;
        r.student_id = field(c_student);
        r.exercise_id = field(c_exercise);
        if (r.student_id.empty()) malformed(line_no, "empty student_id");
        if (r.exercise_id.empty()) malformed(line_no, "empty exercise_id");
        for (auto& c : split(field(c_concepts), concept_sep)) {
            std::string t = trim(c);
            if (!t.empty()) r.concept_ids.push_back(t);
        }
        if (r.concept_ids.empty()) malformed(line_no, "empty concept list");
        r.timestamp = parse_double(field(c_ts), line_no, "timestamp");
        if (r.timestamp < 0) malformed(line_no, "negative timestamp");
        r.answer_time = parse_double(field(c_at), line_no, "answer_time_s");
        if (r.answer_time < 0) malformed(line_no, "negative answer_time_s");
        r.answer_time = std::min(r.answer_time, kMaxAnswerTimeS);
        std::string correct = field(c_correct);
        if (correct != "0" && correct != "1") malformed(line_no, "correct must be 0 or 1, got '" + correct + "'");
        r.correct = correct == "1" ? 1 : 0;

        int present = 0;
        std::array<double, 4> emo{};
        for (int i = 0; i < 4; ++i) {
            std::string v = c_emo[i] >= 0 ? field(c_emo[i]) : std::string();
            if (!v.empty()) {
                emo[static_cast<std::size_t>(i)] = parse_double(v, line_no, "emotion");
                if (emo[static_cast<std::size_t>(i)] < 0.0 || emo[static_cast<std::size_t>(i)] > 1.0)
                    malformed(line_no, "emotion value outside [0,1]");
                ++present;
            }
        }
        if (present != 0 && present != 4) malformed(line_no, "partially populated emotion columns");
        if (present == 4) {
            r.emotions = emo;
            ++with_emotions;
        }
        records.push_back(std::move(r));
    }

    if (with_emotions != 0 && with_emotions != static_cast<int>(records.size()))
        throw std::runtime_error("mixed-emotion-presence: " + std::to_string(with_emotions) + " of " +
                                 std::to_string(records.size()) + " rows carry emotions");

    std::stable_sort(records.begin(), records.end(), [](const InteractionRecord& a, const InteractionRecord& b) {
        if (a.student_id != b.student_id) return a.student_id < b.student_id;
        return a.timestamp < b.timestamp;
    });

    for (std::size_t i = 0; i < records.size(); ++i) {
        if (i > 0 && records[i].student_id == records[i - 1].student_id) {
            double minutes = (records[i].timestamp - records[i - 1].timestamp) / 60.0;
            records[i].interval_time = std::min(std::max(minutes, 0.0), kMaxIntervalMin);
        } else {
            records[i].interval_time = 0.0;
        }
    }
    return records;
}

std::vector<InteractionRecord> parse_interactions_file(const std::string& path, const ColumnMapping* mapping) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return parse_interactions(in, mapping);
}

void write_interactions_csv(std::ostream& out, const std::vector<InteractionRecord>& records) {
    out << "student_id,exercise_id,concept_ids,timestamp,answer_time_s,correct,"
           "concentration,boredom,confusion,frustration\n";
    out << std::setprecision(10);
    for (const auto& r : records) {
        out << r.student_id << ',' << r.exercise_id << ',';
        for (std::size_t i = 0; i < r.concept_ids.size(); ++i) out << (i ? ";" : "") << r.concept_ids[i];
        out << ',' << r.timestamp << ',' << r.answer_time << ',' << r.correct << ',';
        if (r.emotions) {
            const auto& e = *r.emotions;
            out << e[0] << ',' << e[1] << ',' << e[2] << ',' << e[3];
        } else {
            out << ",,,";
        }
        out << '\n';
    }
}

int discretize_emotion(double v, int bins) {
    if (bins < 1) throw std::invalid_argument("discretize_emotion: bins must be >= 1");
    if (v < 0.0 || v > 1.0) throw std::invalid_argument("discretize_emotion: value outside [0,1]");
    return std::min(static_cast<int>(std::floor(v * bins)), bins - 1);
}

Vocabulary build_vocabulary(const std::vector<InteractionRecord>& records) {
    Vocabulary v;
    for (const auto& r : records) {
        v.exercise.emplace(r.exercise_id, 0);
        for (const auto& c : r.concept_ids) v.concepts.emplace(c, 0);
        v.answer_time.emplace(static_cast<int>(std::llround(r.answer_time)), 0);
        v.interval_time.emplace(static_cast<int>(std::llround(r.interval_time)), 0);
    }
    int i = 1;
    for (auto& [k, idx] : v.exercise) idx = i++;
    i = 1;
    for (auto& [k, idx] : v.concepts) idx = i++;
    i = 1;
    for (auto& [k, idx] : v.answer_time) idx = i++;
    i = 1;
    for (auto& [k, idx] : v.interval_time) idx = i++;
    return v;
}

std::vector<StudentSequence> build_sequences(const std::vector<InteractionRecord>& records,
                                             int length, const Vocabulary& vocab, int bins) {
    if (length < 2) throw std::invalid_argument("build_sequences: length must be >= 2");
    bool has_emotions = dataset_has_emotions(records);

    auto lookup = [](const auto& table, const auto& key, const char* what) {
        auto it = table.find(key);
        if (it == table.end()) throw std::runtime_error(std::string("unknown token in frozen vocabulary: ") + what);
        return it->second;
    };

    std::vector<StudentSequence> out;
    StudentSequence* seq = nullptr;
    auto open_chunk = [&](const std::string& student) {
        out.emplace_back();
        seq = &out.back();
        seq->student_id = student;
        seq->length = length;
        seq->has_emotions = has_emotions;
        seq->exercise.assign(static_cast<std::size_t>(length), 0);
        seq->concepts.assign(static_cast<std::size_t>(length), 0);
        seq->answer_time.assign(static_cast<std::size_t>(length), 0);
        seq->interval_time.assign(static_cast<std::size_t>(length), 0);
        seq->answer.assign(static_cast<std::size_t>(length), 0);
        for (auto& e : seq->emotion_bins) e.assign(static_cast<std::size_t>(length), 0);
        seq->emotion_raw.assign(static_cast<std::size_t>(length), {0, 0, 0, 0});
        seq->mask.assign(static_cast<std::size_t>(length), 0);
    };

    for (const auto& r : records) {
        if (seq == nullptr || r.student_id != seq->student_id || seq->real_length == length)
            open_chunk(r.student_id);
        int t = seq->real_length;
        auto ti = static_cast<std::size_t>(t);
        seq->exercise[ti] = lookup(vocab.exercise, r.exercise_id, "exercise");
        seq->concepts[ti] = lookup(vocab.concepts, r.concept_ids.front(), "concept");
        seq->answer_time[ti] = lookup(vocab.answer_time, static_cast<int>(std::llround(r.answer_time)), "answer_time");
        seq->interval_time[ti] =
            lookup(vocab.interval_time, static_cast<int>(std::llround(r.interval_time)), "interval_time");
        seq->answer[ti] = r.correct + 1;
        if (r.emotions) {
            for (int e = 0; e < 4; ++e) {
                double val = (*r.emotions)[static_cast<std::size_t>(e)];
                seq->emotion_bins[static_cast<std::size_t>(e)][ti] = discretize_emotion(val, bins) + 1;
                seq->emotion_raw[ti][static_cast<std::size_t>(e)] = val;
            }
        }
        seq->mask[ti] = 1;
        ++seq->real_length;
    }
    return out;
}

std::vector<FoldSplit> split_folds(std::vector<std::string> student_ids, int k,
                                   double val_fraction, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("split_folds: k must be >= 2");
    if (static_cast<int>(student_ids.size()) < k)
        throw std::invalid_argument("split_folds: fewer students than folds");
    std::sort(student_ids.begin(), student_ids.end());
    Rng rng(seed);
    rng.shuffle(student_ids);

    int n = static_cast<int>(student_ids.size());
    std::vector<std::vector<std::string>> parts(static_cast<std::size_t>(k));
    for (int i = 0; i < n; ++i)
        parts[static_cast<std::size_t>(i % k)].push_back(student_ids[static_cast<std::size_t>(i)]);

    std::vector<FoldSplit> folds;
    for (int f = 0; f < k; ++f) {
        FoldSplit fs;
        fs.test = parts[static_cast<std::size_t>(f)];
        std::vector<std::string> rest;
        for (int p = 0; p < k; ++p)
            if (p != f)
                rest.insert(rest.end(), parts[static_cast<std::size_t>(p)].begin(),
                            parts[static_cast<std::size_t>(p)].end());
        rng.shuffle(rest);
        int n_val = static_cast<int>(std::llround(rest.size() * val_fraction));
        fs.validation.assign(rest.begin(), rest.begin() + n_val);
        fs.train.assign(rest.begin() + n_val, rest.end());
        folds.push_back(std::move(fs));
    }
    return folds;
}

void SyntheticProfile::validate() const {
    if (students <= 0 || length <= 0 || concepts <= 0 || exercises <= 0)
        throw std::invalid_argument("SyntheticProfile: counts must be positive");
    if (coupling < 0.0) throw std::invalid_argument("SyntheticProfile: coupling must be >= 0");
    if (inertia < 0.0 || inertia >= 1.0) throw std::invalid_argument("SyntheticProfile: inertia outside [0,1)");
    for (double t : trait_mean)
        if (t < 0.0 || t > 1.0) throw std::invalid_argument("SyntheticProfile: trait mean outside [0,1]");
}

std::vector<InteractionRecord> simulate(const SyntheticProfile& profile) {
    profile.validate();
    Rng rng(profile.seed);

    auto clamp01 = [](double x) { return std::min(std::max(x, 0.0), 1.0); };
    auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    auto pad_id = [](const char* prefix, int i) {
        std::ostringstream os;
        os << prefix << std::setw(4) << std::setfill('0') << i;
        return os.str();
    };

    std::vector<double> difficulty(static_cast<std::size_t>(profile.exercises));
    for (double& d : difficulty) d = rng.normal() * profile.difficulty_spread;

    std::vector<InteractionRecord> records;
    records.reserve(static_cast<std::size_t>(profile.students) * profile.length);

    for (int s = 0; s < profile.students; ++s) {
        double skill = rng.normal() * profile.skill_sd;
        std::array<double, 4> trait{};
        for (int e = 0; e < 4; ++e)
            trait[static_cast<std::size_t>(e)] =
                clamp01(profile.trait_mean[static_cast<std::size_t>(e)] + rng.normal() * profile.trait_sd);

        std::vector<double> mastery(static_cast<std::size_t>(profile.concepts), skill);
        std::vector<int> streak(static_cast<std::size_t>(profile.concepts), 0);
        std::array<double, 4> emo = trait;
        std::array<double, 4> shock{};
        double ts = 0.0;

        for (int t = 0; t < profile.length; ++t) {
            int ex = rng.uniform_int(profile.exercises);
            int concept_idx = ex % profile.concepts;
            auto ci = static_cast<std::size_t>(concept_idx);

            for (int e = 0; e < 4; ++e) {
                auto ei = static_cast<std::size_t>(e);
                // concentration and boredom also drift on their own, so the
                // learning-rate modulation below is not reconstructible from
                // the answer stream alone
                double drift = e < 2 ? 0.1 * rng.normal() : 0.0;
                emo[ei] = clamp01(profile.inertia * emo[ei] + (1.0 - profile.inertia) * trait[ei] +
                                  shock[ei] + drift);
                shock[ei] = 0.0;
            }

            double logit = mastery[ci] - difficulty[static_cast<std::size_t>(ex)] +
                           profile.coupling * (emo[0] - 0.5) - profile.coupling * emo[2];
            int correct = rng.bernoulli(sigmoid(logit)) ? 1 : 0;
            // learning is emotion-modulated: concentration amplifies the gain,
            // boredom suppresses it; coupling = 0 restores a flat gain
            double gain_scale = 1.0 + profile.coupling * (emo[0] - emo[1]);
            if (gain_scale < 0.0) gain_scale = 0.0;
            mastery[ci] += profile.mastery_gain * gain_scale;

            if (correct) {
                if (++streak[ci] == 3) {
                    shock[0] -= 0.1;  // attention drifts on an easy run
                    streak[ci] = 0;
                }
            } else {
                streak[ci] = 0;
                shock[2] += 0.15;
                shock[3] += 0.12;
            }

            double interval_min = t == 0 ? 0.0 : rng.log_uniform(1.0, 240.0);
            ts += interval_min * 60.0;

            InteractionRecord r;
            r.student_id = pad_id("s", s);
            r.exercise_id = pad_id("e", ex);
            r.concept_ids = {pad_id("c", concept_idx)};
            r.timestamp = ts;
            r.answer_time = rng.log_uniform(5.0, 300.0);
            r.interval_time = interval_min;
            r.correct = correct;
            if (profile.emit_emotions) r.emotions = emo;
            records.push_back(std::move(r));
        }
    }
    return records;
}

QMatrix build_qmatrix(const std::vector<InteractionRecord>& records, const Vocabulary& vocab,
                      bool multi_hot) {
    QMatrix q;
    q.concepts = vocab.n_concepts();
    q.rows.assign(static_cast<std::size_t>(vocab.n_exercises()) + 1,
                  std::vector<double>(static_cast<std::size_t>(q.concepts), 0.0));
    std::vector<char> seen(q.rows.size(), 0);
    for (const auto& r : records) {
        int ex = vocab.exercise.at(r.exercise_id);
        auto exi = static_cast<std::size_t>(ex);
        if (seen[exi]) continue;
        seen[exi] = 1;
        if (r.concept_ids.empty()) throw std::runtime_error("exercise with empty concept list: " + r.exercise_id);
        if (multi_hot) {
            double w = 1.0 / static_cast<double>(r.concept_ids.size());
            for (const auto& c : r.concept_ids)
                q.rows[exi][static_cast<std::size_t>(vocab.concepts.at(c) - 1)] += w;
        } else {
            q.rows[exi][static_cast<std::size_t>(vocab.concepts.at(r.concept_ids.front()) - 1)] = 1.0;
        }
    }
    return q;
}

bool dataset_has_emotions(const std::vector<InteractionRecord>& records) {
    if (records.empty()) return false;
    return records.front().emotions.has_value();
}

} // namespace dekt
