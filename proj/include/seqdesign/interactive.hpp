#pragma once

#include "seqdesign/bandit.hpp"
#include "seqdesign/config.hpp"
#include "seqdesign/simharness.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace seqdesign {

/// Stage-by-stage session with a human responder.
///
/// Each stage prints the rounded run list of the hybrid design, reads one
/// line per run (observed values of uncontrolled noise factors, then the
/// response) and prints the updated posterior counters. The session file is
/// rewritten after every completed stage, so an interrupted session resumes
/// at the next stage. Seeds follow trial 0 of the simulation harness: feeding
/// simulated responses reproduces run_trial exactly.
class InteractiveSession {
public:
    InteractiveSession(ExperimentConfig config, std::filesystem::path session_file);

    // Reads a saved session; the config comes from the file.
    static InteractiveSession resume(const std::filesystem::path& session_file);

    /// Runs stages until the design is complete (returns true) or input ends
    /// (returns false, progress up to the last full stage is saved).
    bool run(std::istream& in, std::ostream& out);

    bool finished() const;
    const BanditState& state() const { return state_; }
    const std::vector<StageRecord>& records() const { return records_; }
    const std::vector<int>& stage_sizes() const { return stage_sizes_; }
    const ExperimentConfig& config() const { return config_; }
    Design aggregate() const;

private:
    void save() const;
    // Reads the responses for a run list; false on end of input.
    bool read_runs(const std::vector<RoundedRun>& runs, std::istream& in, std::ostream& out,
                   ObservationSet& data) const;

    ExperimentConfig config_;
    std::filesystem::path file_;
    Study study_;
    BanditState state_;
    std::vector<StageRecord> records_;
    std::vector<int> stage_sizes_;
    std::optional<ObservationSet> pretest_;
    int used_ = 0;
};

}  // namespace seqdesign
