use std::collections::BTreeSet;

use super::Layout;

/// Dataset filtering rules. Defaults drop boxes under 2% of the image area
/// and keep images with 3 to 8 remaining objects.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterRules {
    pub min_area_frac: f64,
    pub min_objects: usize,
    pub max_objects: usize,
    /// Layouts holding any object of these classes are dropped whole.
    pub excluded_classes: BTreeSet<i64>,
}

impl Default for FilterRules {
    fn default() -> Self {
        Self {
            min_area_frac: 0.02,
            min_objects: 3,
            max_objects: 8,
            excluded_classes: BTreeSet::new(),
        }
    }
}

impl FilterRules {
    /// Rules that keep everything.
    pub fn permissive() -> Self {
        Self {
            min_area_frac: 0.0,
            min_objects: 0,
            max_objects: usize::MAX,
            excluded_classes: BTreeSet::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FilterStats {
    pub layouts_in: usize,
    pub boxes_removed_area: usize,
    pub layouts_dropped_excluded: usize,
    pub layouts_dropped_count: usize,
    pub layouts_out: usize,
}

impl FilterStats {
    pub fn layouts_dropped(&self) -> usize {
        self.layouts_dropped_excluded + self.layouts_dropped_count
    }
}

pub fn filter_layouts(layouts: &[Layout], rules: &FilterRules) -> Vec<Layout> {
    filter_layouts_with_stats(layouts, rules).0
}

/// Applies the area rule per box, then the class exclusion, then the object
/// count rule. Order of surviving layouts and objects is preserved.
pub fn filter_layouts_with_stats(layouts: &[Layout], rules: &FilterRules) -> (Vec<Layout>, FilterStats) {
    let mut stats = FilterStats {
        layouts_in: layouts.len(),
        ..Default::default()
    };
    let mut out = Vec::with_capacity(layouts.len());
    for layout in layouts {
        let image_area = layout.width as f64 * layout.height as f64;
        let mut kept = layout.clone();
        kept.objects
            .retain(|o| o.bbox.area() / image_area >= rules.min_area_frac);
        stats.boxes_removed_area += layout.objects.len() - kept.objects.len();

        if kept.objects.iter().any(|o| rules.excluded_classes.contains(&o.class_id)) {
            stats.layouts_dropped_excluded += 1;
            continue;
        }
        let m = kept.objects.len();
        if m < rules.min_objects || m > rules.max_objects {
            stats.layouts_dropped_count += 1;
            continue;
        }
        out.push(kept);
    }
    stats.layouts_out = out.len();
    (out, stats)
}
