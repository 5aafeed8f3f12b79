"""Test suite for imaginerio-etl.""" 