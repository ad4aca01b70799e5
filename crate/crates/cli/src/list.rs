//! Comma-separated lists with inclusive ranges: "1..4,6" is [1, 2, 3, 4, 6].

pub fn parse_u64_list(s: &str) -> Result<Vec<u64>, String> {
    let num = |x: &str| x.trim().parse::<u64>().map_err(|_| format!("not a non-negative integer: {x:?}"));
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            return Err(format!("empty item in list {s:?}"));
        }
        match part.split_once("..") {
            Some((lo, hi)) => {
                let (lo, hi) = (num(lo)?, num(hi.trim_start_matches('='))?);
                if lo > hi {
                    return Err(format!("empty range {part:?}"));
                }
                out.extend(lo..=hi);
            }
            None => out.push(num(part)?),
        }
    }
    Ok(out)
}

pub fn parse_list(s: &str) -> Result<Vec<usize>, String> {
    parse_u64_list(s)?
        .into_iter()
        .map(|x| usize::try_from(x).map_err(|_| format!("value too large: {x}")))
        .collect()
}
