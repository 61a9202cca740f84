#pragma once

#include <random>
#include <string>
#include <vector>

#include "edu/model.hpp"

namespace edu::testing {

inline Question make_question(std::string id, std::string text, std::vector<std::string> answers, int correct) {
  Question q{std::move(id), std::move(text), {}};
  for (std::size_t k = 0; k < answers.size(); ++k) {
    q.answers.push_back({q.id + "-a" + std::to_string(k), std::move(answers[k]), static_cast<int>(k) == correct});
  }
  return q;
}

/// Three questions whose correct answers sit on segments 1, 2 and 0.
inline QuestionBank three_question_bank() {
  QuestionBank bank;
  bank.questions.push_back(make_question("q1", "2+2?", {"3", "4", "5", "22"}, 1));
  bank.questions.push_back(make_question("q2", "Which is a mammal?", {"Shark", "Trout", "Whale"}, 2));
  bank.questions.push_back(make_question("q3", "Capital of Brazil?", {"Brasilia", "Rio de Janeiro"}, 0));
  return bank;
}

inline constexpr int kThreeQuestionCorrect[] = {1, 2, 0};
inline constexpr int kThreeQuestionWrong[] = {0, 0, 1};

inline std::string random_text(std::mt19937_64& rng, std::size_t max_len = 12) {
  static const std::string alphabet = "abcdefghijklmnopqrstuvwxyz ?!0123456789\"\\\xc3\xa9";
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  std::string s = "t";
  for (std::size_t n = len(rng); n > 0; --n) {
    // Keep the two-byte UTF-8 sequence intact.
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 2);
    const auto i = pick(rng);
    if (static_cast<unsigned char>(alphabet[i]) == 0xc3) {
      s += alphabet.substr(i, 2);
    } else if (static_cast<unsigned char>(alphabet[i]) == 0xa9) {
      s += "x";
    } else {
      s += alphabet[i];
    }
  }
  return s;
}

/// A valid question with 2-4 answers and exactly one correct.
inline Question random_valid_question(std::mt19937_64& rng, const std::string& id) {
  std::uniform_int_distribution<int> count(kMinAnswers, kMaxAnswers);
  const int n = count(rng);
  std::uniform_int_distribution<int> which(0, n - 1);
  const int correct = which(rng);
  Question q{id, random_text(rng), {}};
  for (int k = 0; k < n; ++k) q.answers.push_back({id + "-" + std::to_string(k), random_text(rng), k == correct});
  return q;
}

inline QuestionBank random_valid_bank(std::mt19937_64& rng, int min_questions = 1, int max_questions = 10) {
  std::uniform_int_distribution<int> count(min_questions, max_questions);
  std::uniform_int_distribution<std::int64_t> rev(0, 1000);
  QuestionBank bank;
  bank.revision = rev(rng);
  for (int i = count(rng); i > 0; --i) {
    bank.questions.push_back(random_valid_question(rng, "q" + std::to_string(bank.questions.size())));
  }
  return bank;
}

/// Arbitrary, frequently invalid, question candidate.
inline Question random_candidate(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(0, 6);
  std::bernoulli_distribution coin(0.5), rare(0.1);
  Question q{rare(rng) ? "" : "c", rare(rng) ? "  " : random_text(rng), {}};
  for (int k = count(rng); k > 0; --k) {
    q.answers.push_back({rare(rng) ? "dup" : "a" + std::to_string(k), rare(rng) ? "" : random_text(rng), coin(rng)});
  }
  return q;
}

}  // namespace edu::testing
