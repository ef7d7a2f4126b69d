use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{Point, QuadBox};

/// One line of an SROIE-style ground-truth file: eight corner coordinates
/// followed by the transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub quad: QuadBox,
    /// Kept verbatim; localization never reads it.
    pub transcript: String,
}

/// Parses `x1,y1,x2,y2,x3,y3,x4,y4[,transcript]` lines. The transcript is
/// everything after the eighth comma and may itself contain commas. Blank
/// lines are skipped and CRLF endings tolerated. Corners are reordered to run
/// clockwise from the top-left.
pub fn parse_annotation(bytes: &[u8]) -> Result<Vec<AnnotationRecord>> {
    let text = String::from_utf8_lossy(bytes);
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text);
    let mut out = Vec::new();
    for (i, line) in text.split('\n').enumerate() {
        let line_no = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.splitn(9, ',');
        let mut coords = [0.0f64; 8];
        for (k, c) in coords.iter_mut().enumerate() {
            let field = fields.next().ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected 8 coordinates, found {k}"),
            })?;
            *c = field.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("coordinate {} is not a number: {field:?}", k + 1),
            })?;
        }
        let transcript = fields.next().unwrap_or("").to_owned();
        let corners = [
            Point::new(coords[0], coords[1]),
            Point::new(coords[2], coords[3]),
            Point::new(coords[4], coords[5]),
            Point::new(coords[6], coords[7]),
        ];
        let quad = QuadBox::normalized(corners).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        out.push(AnnotationRecord { quad, transcript });
    }
    Ok(out)
}

/// Writes records one per line, omitting the transcript field when empty.
pub fn serialize_annotations(records: &[AnnotationRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.quad.to_string());
        if !r.transcript.is_empty() {
            out.push(',');
            out.push_str(&r.transcript);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_sroie_line() {
        let r = parse_annotation(b"72,25,326,25,326,64,72,64,TAN WOON YANN\r\n").unwrap();
        assert_eq!(r.len(), 1);
        let c = r[0].quad.corners();
        assert_eq!((c[0].x, c[0].y), (72.0, 25.0));
        assert_eq!((c[2].x, c[2].y), (326.0, 64.0));
        assert_eq!((c[3].x, c[3].y), (72.0, 64.0));
        assert_eq!(r[0].transcript, "TAN WOON YANN");
    }

    #[test]
    fn transcript_keeps_commas() {
        let r = parse_annotation(b"0,0,1,0,1,1,0,1,a,b").unwrap();
        assert_eq!(r[0].transcript, "a,b");
    }

    #[test]
    fn empty_and_blank_input() {
        assert!(parse_annotation(b"").unwrap().is_empty());
        assert_eq!(parse_annotation(b"\n  \n0,0,4,0,4,2,0,2,x\n\n").unwrap().len(), 1);
        assert_eq!(parse_annotation(b"0,0,4,0,4,2,0,2").unwrap()[0].transcript, "");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_annotation(b"0,0,1,0,1,1,0,1,ok\n0,0,x,0,1,1,0,1,bad").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e:?}");
        let e = parse_annotation(b"1,2,3,4,5").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        let e = parse_annotation(b"0,0,0,0,0,0,0,0,flat").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn counterclockwise_input_is_reordered() {
        let r = parse_annotation(b"72,64,326,64,326,25,72,25,t").unwrap();
        let c = r[0].quad.corners();
        assert_eq!((c[0].x, c[0].y, c[1].x, c[1].y), (72.0, 25.0, 326.0, 25.0));
    }

    proptest! {
        #[test]
        fn serialize_parse_identity(
            boxes in proptest::collection::vec((0u32..2000, 0u32..2000, 1u32..400, 1u32..100, "[ -~]{0,20}"), 0..12),
        ) {
            let records: Vec<_> = boxes.iter().map(|(x, y, w, h, t)| AnnotationRecord {
                quad: QuadBox::from_rect(*x as f64, *y as f64, (x + w) as f64, (y + h) as f64).unwrap(),
                transcript: t.clone(),
            }).collect();
            let text = serialize_annotations(&records);
            let back = parse_annotation(text.as_bytes()).unwrap();
            prop_assert_eq!(&back, &records);
            prop_assert_eq!(serialize_annotations(&back), text);
        }
    }
}
