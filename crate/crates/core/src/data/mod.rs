//! CSV ingest and the preprocessing chain: interpolation, sliding window,
//! train/test split, min-max normalization and training partitions.

mod normalize;
mod series;
mod window;

pub use normalize::{denormalize, normalize, MinMax, NormMode, NormStats};
pub use series::{interpolate_missing, read_csv, Column, CsvOptions, RawSeries, Timestamp};
pub use window::{lag_name, partition_training, sliding_window, split_train_test, PartitionSet, WindowedDataset};
