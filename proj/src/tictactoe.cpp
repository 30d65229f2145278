#include "s2s/tools.hpp"

namespace s2s {

namespace {

constexpr std::array<std::uint16_t, 8> kLines = {
    0b000000111, 0b000111000, 0b111000000,  // rows
    0b001001001, 0b010010010, 0b100100100,  // columns
    0b100010001, 0b001010100,               // diagonals
};

std::uint16_t mask_of(const std::array<Mark, 9>& board, Mark mark) {
  std::uint16_t mask = 0;
  for (int i = 0; i < 9; ++i)
    if (board[i] == mark) mask |= static_cast<std::uint16_t>(1u << i);
  return mask;
}

bool has_line(std::uint16_t mask) {
  for (auto line : kLines)
    if ((mask & line) == line) return true;
  return false;
}

char glyph(Mark m) { return m == Mark::X ? 'X' : m == Mark::O ? 'O' : '.'; }

}  // namespace

std::string_view to_string(GameStatus status) {
  switch (status) {
    case GameStatus::Ongoing: return "ongoing";
    case GameStatus::XWins: return "X wins";
    case GameStatus::OWins: return "O wins";
    case GameStatus::Draw: return "draw";
  }
  return "?";
}

GameStatus TicTacToeState::status() const {
  if (has_line(mask_of(board, Mark::X))) return GameStatus::XWins;
  if (has_line(mask_of(board, Mark::O))) return GameStatus::OWins;
  return first_empty() ? GameStatus::Ongoing : GameStatus::Draw;
}

std::optional<int> TicTacToeState::first_empty() const {
  for (int i = 0; i < 9; ++i)
    if (board[i] == Mark::Empty) return i;
  return std::nullopt;
}

void TicTacToeState::play(int cell) {
  if (cell < 0 || cell > 8) throw TicTacToeError("cell " + std::to_string(cell) + " is outside 0..8");
  if (status() != GameStatus::Ongoing) throw TicTacToeError("the game is already over");
  if (board[cell] != Mark::Empty) throw TicTacToeError("cell " + std::to_string(cell) + " is already taken");
  board[cell] = next;
  next = next == Mark::X ? Mark::O : Mark::X;
}

std::string TicTacToeState::render() const {
  std::string out;
  for (int r = 0; r < 3; ++r) {
    if (r) out += '\n';
    for (int c = 0; c < 3; ++c) {
      if (c) out += '|';
      out += glyph(board[r * 3 + c]);
    }
  }
  return out;
}

std::string TicTacToeState::compact() const {
  std::string out;
  for (int i = 0; i < 9; ++i) {
    if (i) out += (i % 3 == 0) ? " / " : " ";
    out += glyph(board[i]);
  }
  return out;
}

}  // namespace s2s
