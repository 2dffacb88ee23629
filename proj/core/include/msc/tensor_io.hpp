#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace msc {

enum class DType : std::uint8_t { f32 = 0, f64 = 1, i64 = 2 };

const char* dtype_name(DType t);
DType dtype_from_name(const std::string& s);
std::size_t dtype_size(DType t);

inline constexpr std::uint16_t kTensorVersion = 1;

struct TensorRecord {
    std::string name;
    std::vector<std::uint64_t> dims;
    std::variant<std::vector<float>, std::vector<double>, std::vector<std::int64_t>> data;

    DType dtype() const;
    std::size_t size() const;          // payload element count
    std::uint64_t extent_product() const;

    // Throws ValidationError on empty dims, zero/product mismatch, or a bad name.
    void validate() const;

    // Row-major matrix view: rows = dims[0], cols = product of the rest.
    // Integer and f32 payloads are converted.
    Eigen::MatrixXd to_matrix() const;
    Eigen::VectorXd to_vector() const;
    std::vector<std::int64_t> to_i64() const;

    static TensorRecord from_matrix(std::string name, const Eigen::MatrixXd& m, DType dtype = DType::f64);
    static TensorRecord from_vector(std::string name, const Eigen::VectorXd& v, DType dtype = DType::f64);
    static TensorRecord from_i64(std::string name, std::vector<std::int64_t> v, std::vector<std::uint64_t> dims = {});

    friend bool operator==(const TensorRecord&, const TensorRecord&) = default;
};

// Names are nonempty and use [A-Za-z0-9_.-] only, so they map to file names.
bool valid_tensor_name(const std::string& name);

std::vector<std::uint8_t> encode_tensor(const TensorRecord& record);
TensorRecord decode_tensor(const std::vector<std::uint8_t>& bytes, const std::string& name = "");

void write_tensor(const TensorRecord& record, const std::filesystem::path& path);
TensorRecord read_tensor(const std::filesystem::path& path);

} // namespace msc
