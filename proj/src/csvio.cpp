#include "wganc/csvio.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "wganc/error.hpp"

namespace wganc::csvio {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void atomic_write_text(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out.good()) throw IoError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

MetricsWriter::MetricsWriter(std::filesystem::path path, bool with_timing)
    : path_(std::move(path)), tmp_path_(path_.string() + ".tmp"), with_timing_(with_timing) {
    out_.open(tmp_path_, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError("cannot open " + tmp_path_.string() + " for writing");
    out_ << "iter,stage,lambda,critic_objective,gen_loss,penalty,ms\n";
}

MetricsWriter::~MetricsWriter() {
    if (!finalized_ && out_.is_open()) out_.close();
}

void MetricsWriter::write_row(const trainer::IterationRecord& row) {
    out_ << row.iter << ',' << row.stage << ',';
    for (size_t i = 0; i < row.lambda.size(); ++i) {
        if (i) out_ << ';';
        out_ << format_double(row.lambda[i]);
    }
    out_ << ',' << format_double(row.critic_objective) << ',' << format_double(row.gen_loss) << ','
         << format_double(row.penalty) << ',';
    if (with_timing_) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f", row.wall_ms);
        out_ << buf;
    } else {
        out_ << '0';
    }
    out_ << '\n';
    out_.flush();
}

void MetricsWriter::finalize() {
    if (finalized_) return;
    out_.close();
    if (!out_.good()) throw IoError("write failed for " + tmp_path_.string());
    std::filesystem::rename(tmp_path_, path_);
    finalized_ = true;
}

void write_samples_csv(const std::filesystem::path& path, const ad::Tensor& samples) {
    if (samples.rank() != 2) throw ShapeError("write_samples_csv: samples must be [n, T]");
    std::ostringstream os;
    const size_t t_len = samples.cols();
    for (size_t t = 0; t < t_len; ++t) {
        if (t) os << ',';
        os << 't' << t;
    }
    os << '\n';
    for (size_t i = 0; i < samples.rows(); ++i) {
        for (size_t t = 0; t < t_len; ++t) {
            if (t) os << ',';
            os << format_double(samples.at(i, t));
        }
        os << '\n';
    }
    atomic_write_text(path, os.str());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

ad::Tensor read_samples_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
    const size_t t_len = split_csv_line(line).size();
    if (t_len == 0 || split_csv_line(line)[0] != "t0") {
        throw IoError(path.string() + ": header must start with t0");
    }

    std::vector<double> values;
    size_t rows = 0;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != t_len) {
            throw IoError(path.string() + ": row " + std::to_string(line_no) + " has " +
                          std::to_string(fields.size()) + " fields, expected " +
                          std::to_string(t_len));
        }
        for (const std::string& f : fields) {
            char* end = nullptr;
            const double v = std::strtod(f.c_str(), &end);
            if (end == f.c_str() || *end != '\0') {
                throw IoError(path.string() + ": row " + std::to_string(line_no) +
                              " has a malformed number '" + f + "'");
            }
            values.push_back(v);
        }
        ++rows;
    }
    if (rows == 0) throw IoError(path.string() + ": no sample rows");
    return ad::Tensor({rows, t_len}, std::move(values));
}

}  // namespace wganc::csvio
