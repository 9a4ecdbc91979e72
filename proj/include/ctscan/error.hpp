#pragma once

#include <stdexcept>
#include <string>

namespace ctscan {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& path, const std::string& what)
        : Error(path + ": " + what), path_(path) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class NoSlices : public Error {
public:
    explicit NoSlices(const std::string& dir) : Error("no slice images in " + dir) {}
};

class BadSlice : public IoError {
public:
    BadSlice(const std::string& path, const std::string& why) : IoError(path, "bad slice: " + why) {}
};

class EmptyMask : public Error {
public:
    EmptyMask() : Error("mask has no foreground pixels") {}
};

class NoCandidates : public Error {
public:
    explicit NoCandidates(const std::string& where) : Error("no candidate masks: " + where) {}
};

class DegenerateEmbedding : public Error {
public:
    DegenerateEmbedding() : Error("embedding has zero norm or is not finite") {}
};

class UnconfiguredImage : public Error {
public:
    explicit UnconfiguredImage(const std::string& fingerprint)
        : Error("fake segmenter has no masks for image " + fingerprint) {}
};

class BadLength : public Error {
public:
    BadLength(int t, int l)
        : Error("routing length l=" + std::to_string(l) + " outside [1, " + std::to_string(t) + "]") {}
};

class TooManySlices : public Error {
public:
    TooManySlices(int t, int l)
        : Error("scan has " + std::to_string(l) + " slices but padded length t=" + std::to_string(t)) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& where) : Error("non-finite value in " + where) {}
};

class SliceError : public Error {
public:
    SliceError(int index, const std::string& what)
        : Error("slice " + std::to_string(index) + ": " + what), index_(index) {}
    int index() const noexcept { return index_; }

private:
    int index_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace ctscan
