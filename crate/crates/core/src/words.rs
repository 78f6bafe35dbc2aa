//! Exact arithmetic in the free group `F_n`.
//!
//! Letters are signed integers: `i` is the generator `a_i` and `-i` its
//! inverse. Words are always stored freely reduced. The letter syntax
//! (`a`..`z`, uppercase for inverses) is only used at the I/O boundary.

use std::fmt;
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Letter = i32;

/// A freely reduced word in `F_n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word {
    rank: usize,
    letters: Vec<Letter>,
}

fn check_letter(letter: Letter, rank: usize) -> Result<()> {
    if letter == 0 || letter.unsigned_abs() as usize > rank {
        return Err(Error::LetterOutOfRange { letter, rank });
    }
    Ok(())
}

/// Appends `letter` to an already reduced buffer, cancelling if needed.
#[inline]
pub(crate) fn push_reduced(buf: &mut Vec<Letter>, letter: Letter) {
    if buf.last() == Some(&-letter) {
        buf.pop();
    } else {
        buf.push(letter);
    }
}

/// Sort key used for canonical rotations: `a < A < b < B < ...`.
#[inline]
pub(crate) fn letter_key(letter: Letter) -> u32 {
    let g = letter.unsigned_abs();
    2 * g - u32::from(letter > 0)
}

impl Word {
    /// Freely reduces `raw` (a stack pass, so the result is the unique reduced form).
    pub fn reduce(raw: &[Letter], rank: usize) -> Result<Word> {
        let mut letters = Vec::with_capacity(raw.len());
        for &l in raw {
            check_letter(l, rank)?;
            push_reduced(&mut letters, l);
        }
        Ok(Word { rank, letters })
    }

    pub(crate) fn from_reduced_unchecked(letters: Vec<Letter>, rank: usize) -> Word {
        debug_assert!(letters.windows(2).all(|w| w[0] != -w[1]));
        Word { rank, letters }
    }

    pub fn empty(rank: usize) -> Word {
        Word {
            rank,
            letters: Vec::new(),
        }
    }

    /// The generator `a_i` (or its inverse for negative `i`).
    pub fn generator(letter: Letter, rank: usize) -> Result<Word> {
        check_letter(letter, rank)?;
        Ok(Word {
            rank,
            letters: vec![letter],
        })
    }

    /// Parses letter syntax: `a`..`z` are generators, uppercase letters are
    /// inverses, `1` or the empty string is the identity.
    pub fn parse(text: &str, rank: usize) -> Result<Word> {
        let trimmed = text.trim();
        if trimmed == "1" || trimmed.is_empty() {
            return Ok(Word::empty(rank));
        }
        let mut raw = Vec::with_capacity(trimmed.len());
        for ch in trimmed.chars() {
            let letter = match ch {
                'a'..='z' => (ch as u8 - b'a' + 1) as Letter,
                'A'..='Z' => -((ch as u8 - b'A' + 1) as Letter),
                ' ' | '.' | '*' => continue,
                _ => return Err(Error::WordSyntax(text.to_string())),
            };
            raw.push(letter);
        }
        Word::reduce(&raw, rank)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn into_letters(self) -> Vec<Letter> {
        self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> Word {
        Word {
            rank: self.rank,
            letters: self.letters.iter().rev().map(|&l| -l).collect(),
        }
    }

    /// Reduced product `self · other`.
    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = self.letters.clone();
        for &l in &other.letters {
            push_reduced(&mut letters, l);
        }
        Word {
            rank: self.rank.max(other.rank),
            letters,
        }
    }

    pub fn pow(&self, exponent: i64) -> Word {
        let base = if exponent < 0 {
            self.inverse()
        } else {
            self.clone()
        };
        let mut letters = Vec::with_capacity(base.len() * exponent.unsigned_abs() as usize);
        for _ in 0..exponent.unsigned_abs() {
            for &l in &base.letters {
                push_reduced(&mut letters, l);
            }
        }
        Word {
            rank: self.rank,
            letters,
        }
    }

    /// `g · self · g^{-1}`.
    pub fn conjugate_by(&self, g: &Word) -> Word {
        g.concat(self).concat(&g.inverse())
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        match (self.letters.first(), self.letters.last()) {
            (Some(&first), Some(&last)) => self.letters.len() == 1 || first != -last,
            _ => true,
        }
    }

    /// Splits `self = conjugator · core · conjugator^{-1}` with `core`
    /// cyclically reduced.
    pub fn cyclic_reduce(&self) -> (Word, Word) {
        let l = &self.letters;
        let mut i = 0;
        let mut j = l.len();
        while j >= i + 2 && l[i] == -l[j - 1] {
            i += 1;
            j -= 1;
        }
        (
            Word::from_reduced_unchecked(l[i..j].to_vec(), self.rank),
            Word::from_reduced_unchecked(l[..i].to_vec(), self.rank),
        )
    }

    /// Length of the cyclically reduced core.
    pub fn cyclic_length(&self) -> usize {
        self.cyclic_reduce().0.len()
    }

    /// Canonical representative of the conjugacy class: the least rotation
    /// of the cyclically reduced core.
    pub fn canonical_cyclic(&self) -> Word {
        let (core, _) = self.cyclic_reduce();
        let start = least_rotation(&core.letters);
        let mut letters = Vec::with_capacity(core.len());
        letters.extend_from_slice(&core.letters[start..]);
        letters.extend_from_slice(&core.letters[..start]);
        Word::from_reduced_unchecked(letters, self.rank)
    }

    /// For a cyclically reduced word, returns `(root, k)` with `self = root^k`
    /// and `root` not a proper power.
    pub fn primitive_root(&self) -> (Word, usize) {
        let n = self.letters.len();
        if n == 0 {
            return (self.clone(), 1);
        }
        // Smallest period from the prefix function.
        let l = &self.letters;
        let mut pi = vec![0usize; n];
        for i in 1..n {
            let mut k = pi[i - 1];
            while k > 0 && l[i] != l[k] {
                k = pi[k - 1];
            }
            if l[i] == l[k] {
                k += 1;
            }
            pi[i] = k;
        }
        let p = n - pi[n - 1];
        let p = if n % p == 0 { p } else { n };
        (Word::from_reduced_unchecked(l[..p].to_vec(), self.rank), n / p)
    }

    /// Renders in letter syntax when `rank <= 26`, integer syntax otherwise.
    pub fn to_letter_string(&self) -> String {
        if self.letters.is_empty() {
            return "1".to_string();
        }
        if self.rank > 26 {
            return format!("{:?}", self.letters);
        }
        self.letters
            .iter()
            .map(|&l| {
                let g = (l.unsigned_abs() - 1) as u8;
                if l > 0 {
                    (b'a' + g) as char
                } else {
                    (b'A' + g) as char
                }
            })
            .collect()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_letter_string())
    }
}

impl Mul for &Word {
    type Output = Word;
    fn mul(self, rhs: &Word) -> Word {
        self.concat(rhs)
    }
}

/// Booth's algorithm: start index of the lexicographically least rotation.
fn least_rotation(s: &[Letter]) -> usize {
    let n = s.len();
    if n == 0 {
        return 0;
    }
    let key = |i: usize| letter_key(s[i % n]);
    let mut failure = vec![-1i64; 2 * n];
    let mut k = 0usize;
    for j in 1..2 * n {
        let sj = key(j);
        let mut i = failure[j - k - 1];
        while i != -1 && sj != key(k + i as usize + 1) {
            if sj < key(k + i as usize + 1) {
                k = j - i as usize - 1;
            }
            i = failure[i as usize];
        }
        if i == -1 && sj != key(k) {
            if sj < key(k) {
                k = j;
            }
            failure[j - k] = -1;
        } else {
            failure[j - k] = i + 1;
        }
    }
    k
}

/// Whether two words represent the same conjugacy class.
pub fn conjugate_in_free_group(w1: &Word, w2: &Word) -> bool {
    w1.cyclic_length() == w2.cyclic_length() && w1.canonical_cyclic() == w2.canonical_cyclic()
}

/// An endomorphism of `F_n`, given by the images of the generators.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Endomorphism {
    rank: usize,
    images: Vec<Word>,
}

impl Endomorphism {
    pub fn new(images: Vec<Word>) -> Result<Endomorphism> {
        let rank = images.len();
        if rank == 0 {
            return Err(Error::ImageCount {
                expected: 1,
                found: 0,
            });
        }
        for (i, w) in images.iter().enumerate() {
            if w.rank() != rank {
                return Err(Error::RankMismatch {
                    expected: rank,
                    found: w.rank(),
                });
            }
            if w.is_empty() {
                return Err(Error::EmptyImage { generator: i + 1 });
            }
        }
        Ok(Endomorphism { rank, images })
    }

    pub fn identity(rank: usize) -> Endomorphism {
        let images = (1..=rank as Letter)
            .map(|i| Word::from_reduced_unchecked(vec![i], rank))
            .collect();
        Endomorphism { rank, images }
    }

    /// Parses one letter-syntax string per generator.
    pub fn parse<S: AsRef<str>>(images: &[S]) -> Result<Endomorphism> {
        let rank = images.len();
        let words = images
            .iter()
            .map(|s| Word::parse(s.as_ref(), rank))
            .collect::<Result<Vec<_>>>()?;
        Endomorphism::new(words)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn images(&self) -> &[Word] {
        &self.images
    }

    pub fn image_of_letter(&self, letter: Letter) -> Word {
        let w = &self.images[letter.unsigned_abs() as usize - 1];
        if letter > 0 {
            w.clone()
        } else {
            w.inverse()
        }
    }

    pub fn max_image_len(&self) -> usize {
        self.images.iter().map(Word::len).max().unwrap_or(0)
    }

    /// Substitutes every letter by its image and reduces.
    pub fn apply(&self, w: &Word) -> Result<Word> {
        if w.rank() != self.rank {
            return Err(Error::RankMismatch {
                expected: self.rank,
                found: w.rank(),
            });
        }
        Ok(self.apply_unchecked(w))
    }

    pub(crate) fn apply_unchecked(&self, w: &Word) -> Word {
        let mut out = Vec::new();
        for &l in w.letters() {
            let img = &self.images[l.unsigned_abs() as usize - 1];
            if l > 0 {
                for &x in img.letters() {
                    push_reduced(&mut out, x);
                }
            } else {
                for &x in img.letters().iter().rev() {
                    push_reduced(&mut out, -x);
                }
            }
        }
        Word::from_reduced_unchecked(out, self.rank)
    }

    /// `self ∘ other`: first `other`, then `self`.
    pub fn compose(&self, other: &Endomorphism) -> Result<Endomorphism> {
        if self.rank != other.rank {
            return Err(Error::RankMismatch {
                expected: self.rank,
                found: other.rank,
            });
        }
        let images = other
            .images
            .iter()
            .map(|w| self.apply_unchecked(w))
            .collect::<Vec<_>>();
        Endomorphism::new(images)
    }

    /// `self^k` (identity for `k == 0`).
    pub fn power(&self, k: usize) -> Result<Endomorphism> {
        let mut out = Endomorphism::identity(self.rank);
        for _ in 0..k {
            out = self.compose(&out)?;
        }
        Ok(out)
    }

    pub fn to_letter_strings(&self) -> Vec<String> {
        self.images.iter().map(Word::to_letter_string).collect()
    }
}

impl fmt::Display for Endomorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .images
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let g = Word::from_reduced_unchecked(vec![i as Letter + 1], self.rank);
                format!("{g}↦{w}")
            })
            .collect();
        f.write_str(&parts.join(", "))
    }
}

/// Free reduction of a raw letter sequence (see [`Word::reduce`]).
pub fn reduce(raw: &[Letter], rank: usize) -> Result<Word> {
    Word::reduce(raw, rank)
}

/// `(core, conjugator)` with `w = conjugator · core · conjugator^{-1}`.
pub fn cyclic_reduce(w: &Word) -> (Word, Word) {
    w.cyclic_reduce()
}

pub fn apply_endo(e: &Endomorphism, w: &Word) -> Result<Word> {
    e.apply(w)
}
