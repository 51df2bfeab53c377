#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "wganc/tensor.hpp"
#include "wganc/trainer.hpp"

namespace wganc::csvio {

// Round-trip-exact decimal formatting for doubles.
std::string format_double(double v);

// Writes content to "<path>.tmp" and renames on completion, so no artifact is
// ever observed partially written.
void atomic_write_text(const std::filesystem::path& path, const std::string& content);

// Streaming metrics writer: rows append to a temp file after every outer
// iteration; finalize() publishes the file (also used to publish the partial
// stream after a numeric abort). Schema:
//   iter,stage,lambda,critic_objective,gen_loss,penalty,ms
// lambda is semicolon-joined. The ms column is 0 unless timing was requested,
// which keeps default runs byte-reproducible.
class MetricsWriter {
public:
    MetricsWriter(std::filesystem::path path, bool with_timing);
    ~MetricsWriter();

    void write_row(const trainer::IterationRecord& row);
    void finalize();

private:
    std::filesystem::path path_;
    std::filesystem::path tmp_path_;
    std::ofstream out_;
    bool with_timing_;
    bool finalized_ = false;
};

// One row per wave, header t0..t{T-1}.
void write_samples_csv(const std::filesystem::path& path, const ad::Tensor& samples);
ad::Tensor read_samples_csv(const std::filesystem::path& path);  // IoError names the bad row

}  // namespace wganc::csvio
