#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dekt/rng.hpp"

namespace dekt {

struct InteractionRecord {
    std::string student_id;
    std::string exercise_id;
    std::vector<std::string> concept_ids;  // at least one
    double timestamp = 0.0;                // seconds since epoch (dataset-local)
    double answer_time = 0.0;              // seconds, capped at 3600
    double interval_time = 0.0;            // minutes since previous record, capped at 43200
    int correct = 0;
    std::optional<std::array<double, 4>> emotions;  // conc, bor, conf, fru, each in [0,1]
};

// Dense token -> index tables; index 0 is reserved for padding everywhere.
struct Vocabulary {
    std::map<std::string, int> exercise;
    std::map<std::string, int> concepts;
    std::map<int, int> answer_time;   // rounded seconds -> index
    std::map<int, int> interval_time; // rounded minutes -> index
    int n_exercises() const { return static_cast<int>(exercise.size()); }
    int n_concepts() const { return static_cast<int>(concepts.size()); }
    int n_answer_time() const { return static_cast<int>(answer_time.size()); }
    int n_interval_time() const { return static_cast<int>(interval_time.size()); }
};

struct StudentSequence {
    std::string student_id;
    int length = 0;       // fixed L
    int real_length = 0;  // valid prefix
    std::vector<int> exercise;
    std::vector<int> concepts;       // first concept index (padding 0)
    std::vector<int> answer_time;
    std::vector<int> interval_time;
    std::vector<int> answer;        // 0 padding, 1 incorrect, 2 correct
    std::array<std::vector<int>, 4> emotion_bins;  // +1 padding offset
    std::vector<std::array<double, 4>> emotion_raw;
    std::vector<char> mask;
    bool has_emotions = false;
};

struct QMatrix {
    // row per exercise index (index 0 = padding, all-zero row), M columns
    std::vector<std::vector<double>> rows;
    int concepts = 0;
    const std::vector<double>& row(int exercise_index) const { return rows[static_cast<std::size_t>(exercise_index)]; }
};

struct FoldSplit {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;
};

struct SyntheticProfile {
    int students = 100;
    int length = 50;
    int concepts = 10;
    int exercises = 50;
    double skill_sd = 1.0;                       // per-student latent skill prior
    std::array<double, 4> trait_mean = {0.6, 0.3, 0.25, 0.25};
    double trait_sd = 0.15;
    double coupling = 2.0;                       // kappa, emotion -> correctness
    double inertia = 0.85;                       // rho
    double difficulty_spread = 1.0;
    double mastery_gain = 0.25;
    bool emit_emotions = true;
    std::uint64_t seed = 0;
    void validate() const;
};

struct ColumnMapping {
    std::map<std::string, std::string> columns;  // required name -> source header
    char concept_separator = ';';
};

// CSV ingestion: the canonical header, or a foreign layout via mapping.
std::vector<InteractionRecord> parse_interactions(std::istream& in,
                                                  const ColumnMapping* mapping = nullptr);
std::vector<InteractionRecord> parse_interactions_file(const std::string& path,
                                                       const ColumnMapping* mapping = nullptr);
void write_interactions_csv(std::ostream& out, const std::vector<InteractionRecord>& records);

int discretize_emotion(double v, int bins);

Vocabulary build_vocabulary(const std::vector<InteractionRecord>& records);

std::vector<StudentSequence> build_sequences(const std::vector<InteractionRecord>& records,
                                             int length, const Vocabulary& vocab, int bins);

std::vector<FoldSplit> split_folds(std::vector<std::string> student_ids, int k,
                                   double val_fraction, std::uint64_t seed);

std::vector<InteractionRecord> simulate(const SyntheticProfile& profile);

QMatrix build_qmatrix(const std::vector<InteractionRecord>& records, const Vocabulary& vocab,
                      bool multi_hot = false);

bool dataset_has_emotions(const std::vector<InteractionRecord>& records);

} // namespace dekt
