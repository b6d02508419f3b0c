"""Mean predictor, first attempt: crashes on an undefined helper."""
import csv

with open("train.csv", newline="") as handle:
    train = list(csv.DictReader(handle))

values = clean_target_column(train)
mean = sum(values) / len(values)

with open("test.csv", newline="") as handle:
    test_ids = [row["id"] for row in csv.DictReader(handle)]

with open("submission.csv", "w", newline="") as handle:
    writer = csv.writer(handle)
    writer.writerow(["id", "pred"])
    for row_id in test_ids:
        writer.writerow([row_id, f"{mean:.6f}"])
