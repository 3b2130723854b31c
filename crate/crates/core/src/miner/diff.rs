//! Line-level shortest edit script distance (Myers, O((N+M)·D)).

/// Size of the shortest line edit script turning one text into another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DiffDistance {
    pub added: usize,
    pub deleted: usize,
    pub total: usize,
}

/// Lines with trailing whitespace removed; nothing else is normalised.
pub fn normalized_lines(text: &str) -> Vec<&str> {
    text.lines().map(str::trim_end).collect()
}

/// Length of the shortest edit script between two sequences.
pub fn edit_script_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let n = a.len() as isize;
    let m = b.len() as isize;
    let max = (n + m) as usize;
    if max == 0 {
        return 0;
    }
    let offset = max as isize + 1;
    // v[k + offset] = furthest x reached on diagonal k = x - y
    let mut v = vec![0isize; 2 * max + 3];
    for d in 0..=max as isize {
        let mut k = -d;
        while k <= d {
            let idx = (k + offset) as usize;
            let mut x = if k == -d || (k != d && v[idx - 1] < v[idx + 1]) {
                v[idx + 1]
            } else {
                v[idx - 1] + 1
            };
            let mut y = x - k;
            while x < n && y < m && a[x as usize] == b[y as usize] {
                x += 1;
                y += 1;
            }
            v[idx] = x;
            if x >= n && y >= m {
                return d as usize;
            }
            k += 2;
        }
    }
    max
}

pub fn diff_distance(a: &str, b: &str) -> DiffDistance {
    let la = normalized_lines(a);
    let lb = normalized_lines(b);
    let total = edit_script_len(&la, &lb);
    // total = |a| + |b| - 2·LCS
    let lcs = (la.len() + lb.len() - total) / 2;
    DiffDistance {
        added: lb.len() - lcs,
        deleted: la.len() - lcs,
        total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical() {
        let d = diff_distance("a\nb\nc", "a\nb\nc");
        assert_eq!(d, DiffDistance::default());
    }

    #[test]
    fn one_changed_line() {
        let d = diff_distance("a\nb\nc", "a\nx\nc");
        assert_eq!(d, DiffDistance { added: 1, deleted: 1, total: 2 });
    }

    #[test]
    fn trailing_whitespace_ignored() {
        assert_eq!(diff_distance("a  \nb", "a\nb\t").total, 0);
        assert_eq!(diff_distance(" a", "a").total, 2);
    }

    #[test]
    fn empty_sides() {
        assert_eq!(diff_distance("", "a\nb"), DiffDistance { added: 2, deleted: 0, total: 2 });
        assert_eq!(diff_distance("a", ""), DiffDistance { added: 0, deleted: 1, total: 1 });
        assert_eq!(diff_distance("", "").total, 0);
    }
}
