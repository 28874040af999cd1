#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tbe/protocols.hpp"

namespace tbe {

/// Fully validated experiment description. Parsed from a JSON config file;
/// unknown keys are rejected and everything is checked before any compute.
struct ExperimentConfig {
    // protocol
    std::string protocol;  // mnist-split | mnist-permuted | class-split | synthetic
    std::string data_dir;
    int n_tasks = 0;
    std::vector<std::vector<int>> groups;
    std::string dataset;  // class-split source: cifar10 | cifar100
    int syn_classes = 4, syn_per_class = 200, syn_test_per_class = 100, syn_dim = 16;
    double syn_separation = 6.0;

    // model
    std::string model_type = "mlp";  // mlp | cnn
    std::vector<std::size_t> hidden = {400, 400};

    std::vector<std::string> methods;  // baseline | tbe | joint
    std::vector<std::uint64_t> seeds;
    TrainHyper hyper;
    std::string output_dir;

    std::string config_hash;  // FNV-1a of the canonical JSON

    /// Parse + validate. `overrides` are dotted-path assignments
    /// ("hyper.epochs=2") applied before validation.
    static ExperimentConfig load(const std::string& path,
                                 const std::vector<std::string>& overrides = {});
    static ExperimentConfig from_json_text(const std::string& text,
                                           const std::vector<std::string>& overrides = {});
};

/// Run every (seed x method) combination; write per-run CSVs, plan audit
/// logs, final checkpoints, an aggregate CSV and a text summary under
/// output_dir. Returns process exit code.
int cmd_run(const ExperimentConfig& cfg);

/// Aggregate the run CSVs in a directory into report.txt / report.csv.
/// Refuses mixed protocols or config hashes.
int cmd_report(const std::string& run_dir);

/// Heatmap for one sample: PPM + raw relevance CSV under out_prefix.
int cmd_heatmap(const std::string& checkpoint_path, const std::string& mnist_dir,
                std::size_t sample_index, const std::string& head, std::size_t target_class,
                const std::string& out_prefix, double epsilon);

/// Verify (or copy from --from) the MNIST IDX files, checking CRC32s.
int cmd_fetch_data(const std::string& data_dir, const std::string& from_dir);

/// Single parsed metrics row of a run CSV.
struct MetricRow {
    std::uint64_t seed;
    int stage;
    int task;
    double accuracy;
    double free_capacity;
    std::string method;
    std::string protocol;
};

struct RunFile {
    std::string config_hash;
    std::vector<MetricRow> rows;
};

void write_run_csv(const RunMetrics& m, const std::string& config_hash, const std::string& path);
RunFile read_run_csv(const std::string& path);

/// FNV-1a 64-bit over a string, hex-encoded.
std::string fnv1a_hex(const std::string& text);

/// Data root: $TBE_DATA_ROOT if set, else "data".
std::string default_data_root();

}  // namespace tbe
