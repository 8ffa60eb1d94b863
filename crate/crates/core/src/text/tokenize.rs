/// Lowercase, split on whitespace, strip non-alphanumeric characters from
/// both ends of each piece and drop pieces that become empty. Apostrophes
/// inside a word survive ("let's"); typographic apostrophes are folded to `'`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .replace('\u{2019}', "'")
        .split_whitespace()
        .map(|piece| piece.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|piece| !piece.is_empty())
        .map(str::to_string)
        .collect()
}
